use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_mirrorlab");

pub struct Run {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.stdout).expect("stdout is one JSON document")
    }
}

pub fn mirrorlab(args: &[String], stdin: Option<&str>) -> Run {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(text) = stdin {
            pipe.write_all(text.as_bytes()).unwrap();
        }
    }
    let Output {
        status,
        stdout,
        stderr,
    } = child.wait_with_output().unwrap();
    Run {
        code: status.code().expect("exited normally"),
        stdout,
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

/// Scratch directory for fixtures, unique per test binary and label.
pub fn scratch(label: &str) -> PathBuf {
    let dir =
        Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("{label}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// One seeded invocation per subcommand, with the stdin it needs.
pub fn subcommand_cases(dir: &Path) -> Vec<(&'static str, Vec<String>, Option<String>)> {
    // {3}, {1,2,4}, {1,2,5}: odd sizes, pairwise intersections even.
    let town = write(
        dir,
        "town.json",
        r#"{"n": 5, "sets": [[3], [1, 2, 4], [1, 2, 5]]}"#,
    );
    // Sizes divisible by 3, pairwise intersections of size 1.
    let modtown = write(
        dir,
        "modtown.json",
        r#"{"n": 7, "sets": [[1, 2, 3], [3, 4, 5], [1, 5, 6]]}"#,
    );
    let spec = write(
        dir,
        "spec.json",
        r#"{"config": {"n": 40, "a": 1, "b": 1}, "alice": "alice:rand-sqrt", "bob": "bob:largest-unsaid", "trials": 60, "master_seed": 11}"#,
    );
    let stream: String = (1..=50)
        .filter(|x| x % 7 != 0)
        .map(|x| format!("{x}\n"))
        .collect();
    let stream_file = write(dir, "stream.txt", &stream);

    vec![
        (
            "play",
            args(&[
                "play",
                "--n",
                "30",
                "--alice",
                "rand-sqrt",
                "--bob",
                "random-unsaid",
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "montecarlo",
            args(&[
                "montecarlo",
                "--n",
                "50",
                "--alice",
                "rand-log",
                "--bob",
                "random-unsaid",
                "--trials",
                "300",
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "montecarlo --spec",
            args(&["montecarlo", "--spec", &spec, "--transcripts"]),
            None,
        ),
        (
            "occurring",
            args(&[
                "occurring",
                "--n",
                "8",
                "--alice",
                "naive",
                "--r",
                "2",
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "memory",
            args(&[
                "memory",
                "--n",
                "64",
                "--alice",
                "rand-sqrt",
                "--bob",
                "random-unsaid",
                "--trials",
                "20",
                "--seed",
                "5",
            ]),
            None,
        ),
        ("memory --spec", args(&["memory", "--spec", &spec]), None),
        (
            "recover-missing (file)",
            args(&[
                "recover-missing",
                "--n",
                "50",
                "--k",
                "7",
                "--stream",
                &stream_file,
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "recover-missing (stdin)",
            args(&[
                "recover-missing",
                "--n",
                "50",
                "--k",
                "7",
                "--stream",
                "-",
                "--seed",
                "5",
            ]),
            Some(stream),
        ),
        (
            "setfam check",
            args(&[
                "setfam", "check", "--kind", "odd-even", "--file", &town, "--seed", "5",
            ]),
            None,
        ),
        (
            "setfam check modtown",
            args(&[
                "setfam",
                "check",
                "--kind",
                "modtown:3,1",
                "--file",
                &modtown,
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "setfam search-max",
            args(&[
                "setfam",
                "search-max",
                "--n",
                "5",
                "--kind",
                "even-odd",
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "setfam mv-from-modtown",
            args(&[
                "setfam",
                "mv-from-modtown",
                "--m",
                "3",
                "--file",
                &modtown,
                "--seed",
                "5",
            ]),
            None,
        ),
        (
            "matching-test",
            args(&[
                "matching-test",
                "--n",
                "6",
                "--samples",
                "5000",
                "--seed",
                "5",
            ]),
            None,
        ),
    ]
}
