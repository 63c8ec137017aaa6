//! Command-line front end. Every subcommand prints one JSON document on
//! stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::engine::{run_game, GameConfig};
use crate::harness::{
    build_players, enumerate_occurring, memory_profile, montecarlo, ExperimentSpec, HarnessError,
};
use crate::setfam::{
    check_covering, check_modtown, check_mv, check_town, covering_lower_bound, max_town_size,
    modtown_to_mv, FamilyFile, ModtownSpec, SetFamily, TownKind,
};
use crate::strategies::{sample_matching, StrategyName};
use crate::streamrec::{recover_missing, PowerSumSketch};

#[derive(Parser, Debug)]
#[command(
    name = "mirrorlab",
    version,
    about = "Space-bounded strategies for the (a,b)-mirror game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one game and print its transcript.
    Play {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate Alice's win rate over seeded games.
    Montecarlo(ExperimentArgs),
    /// Enumerate the r-occurring sets of a deterministic Alice.
    Occurring {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure both players' state sizes over seeded games.
    Memory(ExperimentArgs),
    /// Recover the numbers missing from a stream (one integer per line).
    RecoverMissing {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// File to read, or `-` for stdin.
        #[arg(long)]
        stream: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Set-family checks and searches.
    Setfam {
        #[command(subcommand)]
        command: SetfamCommand,
    },
    /// Sample perfect matchings and test them for uniformity.
    MatchingTest {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 30000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
struct GameArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    a: usize,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value = "naive")]
    alice: String,
    #[arg(long, default_value = "smallest-unsaid")]
    bob: String,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON experiment spec; replaces the game flags.
    #[arg(long, conflicts_with_all = ["n", "trials"])]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    a: usize,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value = "naive")]
    alice: String,
    #[arg(long, default_value = "smallest-unsaid")]
    bob: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include every transcript in the report.
    #[arg(long)]
    transcripts: bool,
    /// Run trials on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand, Debug)]
enum SetfamCommand {
    /// Check a family file against a town kind or `modtown:p,L`.
    Check {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Largest town of a kind on 1..=n, by exhaustive search.
    SearchMax {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Characteristic-vector MV family of a Modtown.
    MvFromModtown {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A failure after successful argument parsing.
#[derive(Debug)]
enum Failure {
    /// A check ran and did not hold; the report is still printed.
    Check(Value),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

/// Runs the CLI over `argv` (program name first), writing the report to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let (value, code) = match dispatch(cli.command) {
        Ok(v) => (v, 0),
        Err(Failure::Check(v)) => (v, 1),
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return 1;
        }
    };
    let text = serde_json::to_string_pretty(&value).expect("reports serialize");
    if writeln!(out, "{text}").is_err() {
        return 1;
    }
    code
}

/// Entry point for the `mirrorlab` binary.
pub fn cli_main(argv: impl IntoIterator<Item = String>) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn to_value(report: &impl Serialize) -> Value {
    serde_json::to_value(report).expect("reports serialize")
}

fn big_to_value(x: &BigUint) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Play { game, seed } => play(&game, seed),
        Command::Montecarlo(args) => {
            let spec = experiment_spec(&args)?;
            Ok(to_value(&montecarlo(&spec)?))
        }
        Command::Occurring { game, r, seed: _ } => occurring(&game, r),
        Command::Memory(args) => {
            let spec = experiment_spec(&args)?;
            match memory_profile(&spec) {
                Ok(report) => Ok(to_value(&report)),
                Err(e @ HarnessError::BudgetExceeded { .. }) => Err(Failure::Check(json!({
                    "budget_exceeded": e.to_string(),
                }))),
                Err(e) => Err(e.into()),
            }
        }
        Command::RecoverMissing {
            n,
            k,
            stream,
            seed: _,
        } => recover(n, k, &stream),
        Command::Setfam { command } => setfam(command),
        Command::MatchingTest { n, samples, seed } => matching_test(n, samples, seed),
    }
}

fn play(game: &GameArgs, seed: u64) -> Outcome {
    let config = GameConfig::new(game.n, game.a, game.b)?;
    let alice: StrategyName = game.alice.parse()?;
    let bob: StrategyName = game.bob.parse()?;
    let (mut a, mut b) = build_players(&config, &alice, &bob, seed)?;
    let transcript = run_game(a.as_mut(), b.as_mut(), &config, seed)?;
    Ok(to_value(&transcript))
}

fn experiment_spec(args: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.spec {
        Some(path) => serde_json::from_str::<ExperimentSpec>(&fs::read_to_string(path)?)?,
        None => {
            let n = args.n.expect("clap requires --n without --spec");
            let config = GameConfig::new(n, args.a, args.b)?;
            ExperimentSpec::new(config, &args.alice, &args.bob, args.trials, args.seed)
        }
    };
    spec.collect.transcripts |= args.transcripts;
    spec.serial |= args.serial;
    Ok(spec)
}

fn occurring(game: &GameArgs, r: usize) -> Outcome {
    let config = GameConfig::new(game.n, game.a, game.b)?;
    let alice: StrategyName = game.alice.parse()?;
    let strategy = alice.build(&config, crate::engine::Player::Alice, None)?;
    let occ = enumerate_occurring(strategy.as_ref(), &config, r)?;
    let p = config.a() + config.b();
    let covering = check_covering(&occ.family, p, r);
    let bound = covering_lower_bound(config.n() as u64, p as u64, r as u64)?;
    let report = json!({
        "config": config,
        "alice": alice.to_string(),
        "r": r,
        "size": occ.family.len(),
        "family": occ.family.canonical().to_file(),
        "covering": covering,
        "covering_p": p,
        "covering_lower_bound": big_to_value(&bound),
        "meets_lower_bound": BigUint::from(occ.family.len()) >= bound,
    });
    if covering {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

fn read_stream(source: &str) -> Result<Vec<usize>, Failure> {
    let mut text = String::new();
    if source == "-" {
        io::stdin().lock().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(source)?;
    }
    text.as_bytes()
        .lines()
        .map(|line| -> Result<Option<usize>, Failure> {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                return Ok(None);
            }
            t.parse::<usize>()
                .map(Some)
                .map_err(|_| Failure::Runtime(format!("{t:?} is not a number")))
        })
        .filter_map(Result::transpose)
        .collect()
}

fn recover(n: usize, k: usize, stream: &str) -> Outcome {
    let numbers = read_stream(stream)?;
    let mut sketch = PowerSumSketch::new(n, k)?;
    for x in numbers {
        sketch.ingest(x)?;
    }
    Ok(json!(recover_missing(&sketch, n, k)?))
}

fn read_family(path: &PathBuf) -> Result<SetFamily, Failure> {
    let file: FamilyFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(SetFamily::from_file(&file)?)
}

fn setfam(command: SetfamCommand) -> Outcome {
    match command {
        SetfamCommand::Check {
            kind,
            file,
            seed: _,
        } => {
            let family = read_family(&file)?;
            let valid = match kind.strip_prefix("modtown:") {
                Some(spec) => check_modtown(&family, &spec.parse::<ModtownSpec>()?),
                None => check_town(&family, kind.parse::<TownKind>()?),
            };
            Ok(
                json!({ "kind": kind, "n": family.ground_n(), "size": family.len(), "valid": valid }),
            )
        }
        SetfamCommand::SearchMax { n, kind, seed: _ } => {
            let kind: TownKind = kind.parse()?;
            let search = max_town_size(n, kind)?;
            Ok(json!({
                "n": n,
                "kind": kind.to_string(),
                "size": search.size,
                "size_without_empty": search.size_without_empty,
                "witness": search.witness.canonical().to_file(),
            }))
        }
        SetfamCommand::MvFromModtown { m, file, seed: _ } => {
            let family = read_family(&file)?;
            let mv = modtown_to_mv(&family, m)?;
            let valid = check_mv(&mv)?;
            let report = json!({ "family": mv, "size": mv.len(), "valid": valid });
            if valid {
                Ok(report)
            } else {
                Err(Failure::Check(report))
            }
        }
    }
}

/// (n-1)!! perfect matchings on n points.
fn matching_count(n: usize) -> u64 {
    (1..n as u64).step_by(2).product()
}

/// Largest n whose matchings are tallied individually.
const MAX_TALLY_N: usize = 10;

fn matching_test(n: usize, samples: u64, seed: u64) -> Outcome {
    if samples == 0 {
        return Err(Failure::Runtime("samples must be at least 1".into()));
    }
    let mut counts: BTreeMap<Vec<(usize, usize)>, u64> = BTreeMap::new();
    let mut involution_ok = true;
    for i in 0..samples {
        let m = sample_matching(n, crate::engine::mix_seed(seed, i))?;
        involution_ok &= (1..=n).all(|x| {
            let y = m.matched(x);
            y != x && m.matched(y) == x
        });
        if n <= MAX_TALLY_N {
            *counts.entry(m.pairs()).or_default() += 1;
        }
    }
    let mut report = json!({
        "n": n,
        "samples": samples,
        "seed": seed,
        "involution_ok": involution_ok,
    });
    let mut uniform_ok = true;
    if (4..=MAX_TALLY_N).contains(&n) {
        let cells = matching_count(n);
        let expected = samples as f64 / cells as f64;
        let seen: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let unseen = (cells - counts.len() as u64) as f64 * expected;
        let chi_square = seen + unseen;
        let dof = (cells - 1) as f64;
        let p_value = ChiSquared::new(dof).expect("dof >= 1").sf(chi_square);
        uniform_ok = p_value > 0.01;
        report["matchings"] = json!(cells);
        report["distinct_seen"] = json!(counts.len());
        report["chi_square"] = json!(chi_square);
        report["dof"] = json!(dof);
        report["p_value"] = json!(p_value);
        if n == 4 {
            report["frequencies"] = json!(counts
                .iter()
                .map(|(pairs, &c)| json!({ "pairs": pairs, "count": c, "frequency": c as f64 / samples as f64 }))
                .collect::<Vec<_>>());
        }
    }
    if involution_ok && uniform_ok {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}
