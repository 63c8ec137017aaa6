//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::cli::{mirrorlab, scratch, subcommand_cases};
use common::exhaustive;
use mirrorlab::harness::{enumerate_occurring, memory_profile, montecarlo, ExperimentSpec};
use mirrorlab::setfam::{
    check_covering, check_mv, check_town, covering_lower_bound, eventown_pairing, max_town_size,
    modtown_to_mv, SetFamily, TownKind,
};
use mirrorlab::strategies::{
    adversary_random_unsaid, alice_naive, alice_odd_mirror, bob_mirror, bob_tuple_mirror,
    sample_matching,
};
use mirrorlab::{run_game, GameConfig, Outcome, Player, PowerSumSketch};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (
        took < limit,
        format!("{:.1}s of {}s", took.as_secs_f64(), limit.as_secs()),
    )
}

// 1 -------------------------------------------------------------------------

fn never_lose() -> Verdict {
    let start = Instant::now();
    let mut lines = 0;
    let mut losses = 0;
    let mut tally = |t: &mirrorlab::Transcript| {
        lines += 1;
        losses += (t.outcome != Outcome::BothWin) as usize;
    };
    for n in [2, 4, 6, 8] {
        let config = GameConfig::classic(n).unwrap();
        exhaustive(
            &config,
            Player::Bob,
            bob_mirror(n).unwrap().as_ref(),
            &mut tally,
        );
    }
    for n in [1, 3, 5, 7] {
        let config = GameConfig::classic(n).unwrap();
        exhaustive(
            &config,
            Player::Alice,
            alice_odd_mirror(n).unwrap().as_ref(),
            &mut tally,
        );
    }
    for (n, b) in [(3, 2), (6, 2), (4, 3), (8, 3)] {
        let config = GameConfig::new(n, 1, b).unwrap();
        exhaustive(
            &config,
            Player::Bob,
            bob_tuple_mirror(n, b).unwrap().as_ref(),
            &mut tally,
        );
    }

    // 10^4 seeded games per strategy against a uniformly random fresh-number
    // opponent, n drawn from the valid sizes up to 1000.
    const GAMES: u64 = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut random_games = 0;
    let mut random_losses = 0;
    for family in 0..4 {
        for seed in 0..GAMES {
            let (config, mut subject, seat) = match family {
                0 => {
                    let n = 2 * rng.random_range(1..=500);
                    (
                        GameConfig::classic(n).unwrap(),
                        bob_mirror(n).unwrap(),
                        Player::Bob,
                    )
                }
                1 => {
                    let n = 2 * rng.random_range(0..500) + 1;
                    (
                        GameConfig::classic(n).unwrap(),
                        alice_odd_mirror(n).unwrap(),
                        Player::Alice,
                    )
                }
                b => {
                    let n = (b + 1) * rng.random_range(1..=1000 / (b + 1));
                    (
                        GameConfig::new(n, 1, b).unwrap(),
                        bob_tuple_mirror(n, b).unwrap(),
                        Player::Bob,
                    )
                }
            };
            let mut opponent =
                adversary_random_unsaid(config.n(), config.quota(seat.opponent())).unwrap();
            let t = match seat {
                Player::Alice => run_game(subject.as_mut(), opponent.as_mut(), &config, seed),
                Player::Bob => run_game(opponent.as_mut(), subject.as_mut(), &config, seed),
            }
            .unwrap();
            random_games += 1;
            random_losses += (t.outcome != Outcome::BothWin) as usize;
        }
    }
    let (fast, took) = within(Duration::from_secs(60), start);
    verdict(
        losses == 0 && random_losses == 0 && fast,
        format!(
            "exhaustive {losses}/{lines} lost, random {random_losses}/{random_games} lost, {took}"
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn missing_k() -> Verdict {
    let start = Instant::now();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exact = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=64);
        let mut stream: Vec<usize> = (1..=n).collect();
        stream.shuffle(&mut rng);
        let removed: BTreeSet<usize> = stream.split_off(n - k).into_iter().collect();
        let mut sketch = PowerSumSketch::new(n, k).unwrap();
        for &x in &stream {
            sketch.ingest(x).unwrap();
        }
        let got = mirrorlab::recover_missing(&sketch, n, k).unwrap();
        let seen: BTreeSet<usize> = stream.iter().copied().collect();
        let oracle: Vec<usize> = (1..=n).filter(|x| !seen.contains(x)).collect();
        debug_assert_eq!(oracle, removed.iter().copied().collect::<Vec<_>>());
        exact += (got == oracle) as usize;
    }
    let (fast, took) = within(Duration::from_secs(60), start);
    verdict(exact == 1000 && fast, format!("{exact}/1000 exact, {took}"))
}

// 3 -------------------------------------------------------------------------

fn rand_log() -> Verdict {
    let n = 100;
    let config = GameConfig::classic(n).unwrap();
    let trials = 1_000_000;
    let run = |bob: &str, seed: u64| {
        montecarlo(&ExperimentSpec::new(
            config,
            "alice:rand-log",
            bob,
            trials,
            seed,
        ))
        .unwrap()
    };
    let smallest = run("bob:smallest-unsaid", 3);
    let largest = run("bob:largest-unsaid", 33);
    let floor = 1.0 / n as f64 - 3.0 * smallest.sigma();
    let gap = (smallest.win_rate - largest.win_rate).abs();
    let joint_sigma = smallest.sigma().hypot(largest.sigma());
    verdict(
        smallest.win_rate >= floor && gap <= 3.0 * joint_sigma && smallest.errors == 0,
        format!(
            "win rate {:.5} vs floor {:.5}; largest-unsaid {:.5}, gap {:.5} vs 3σ {:.5}",
            smallest.win_rate,
            floor,
            largest.win_rate,
            gap,
            3.0 * joint_sigma
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn rand_sqrt() -> Verdict {
    let start = Instant::now();
    let config = GameConfig::classic(400).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, bob) in [
        "bob:smallest-unsaid",
        "bob:largest-unsaid",
        "bob:random-unsaid",
    ]
    .into_iter()
    .enumerate()
    {
        let report = montecarlo(&ExperimentSpec::new(
            config,
            "alice:rand-sqrt",
            bob,
            2000,
            40 + i as u64,
        ))
        .unwrap();
        pass &= report.win_rate >= 0.98 && report.errors == 0;
        parts.push(format!("{bob} {:.4}", report.win_rate));
    }
    let (fast, took) = within(Duration::from_secs(300), start);
    verdict(pass && fast, format!("{}, {took}", parts.join(", ")))
}

// 5 -------------------------------------------------------------------------

fn space_scaling() -> Verdict {
    let mirror = memory_profile(&ExperimentSpec::new(
        GameConfig::classic(1024).unwrap(),
        "alice:random-unsaid",
        "bob:mirror",
        50,
        5,
    ))
    .unwrap();
    let mirror_bits = mirror.player(Player::Bob).overall_max_bits;
    let limit = 2 * (1024f64).log2().ceil() as u64;

    let mut ratios = Vec::new();
    for n in [100usize, 400, 1600] {
        let report = memory_profile(&ExperimentSpec::new(
            GameConfig::classic(n).unwrap(),
            "alice:rand-sqrt",
            "bob:random-unsaid",
            20,
            50 + n as u64,
        ))
        .unwrap();
        let bits = report.player(Player::Alice).overall_max_bits as f64;
        let log = (n as f64).log2();
        ratios.push(bits / ((n as f64).sqrt() * log * log));
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        mirror_bits <= limit && max / min < 2.0,
        format!(
            "mirror {mirror_bits} bits (limit {limit}); rand-sqrt ratios {:.3}/{:.3}/{:.3}, spread {:.3}",
            ratios[0],
            ratios[1],
            ratios[2],
            max / min
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn towns() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut found = Vec::new();
    for n in 2..=6 {
        let odd_even = max_town_size(n, TownKind::ODD_EVEN).unwrap();
        let even_odd = max_town_size(n, TownKind::EVEN_ODD).unwrap();
        pass &= odd_even.size == n && even_odd.size <= n;
        pass &= check_town(&odd_even.witness, TownKind::ODD_EVEN)
            && odd_even.witness.len() == odd_even.size;
        pass &= check_town(&even_odd.witness, TownKind::EVEN_ODD)
            && even_odd.witness.len() == even_odd.size;
        found.push(format!("{n}:{}/{}", odd_even.size, even_odd.size));
    }
    let (fast, took) = within(Duration::from_secs(60), start);
    verdict(
        pass && fast,
        format!("n:(odd,even)/(even,odd) {}, {took}", found.join(" ")),
    )
}

// 7 -------------------------------------------------------------------------

fn eventowns() -> Verdict {
    let mut pass = true;
    for n in (2..=20).step_by(2) {
        let family = eventown_pairing(n).unwrap();
        let distinct: BTreeSet<u64> = family.masks().iter().copied().collect();
        pass &= family.len() == 1 << (n / 2)
            && distinct.len() == family.len()
            && check_town(&family, TownKind::EVEN_EVEN)
            && family.masks().iter().all(|&s| {
                family
                    .masks()
                    .iter()
                    .all(|&t| (s & t).count_ones() % 2 == 0)
            });
    }
    verdict(
        pass,
        "n = 2, 4, ..., 20: 2^(n/2) sets, all even intersections",
    )
}

// 8 -------------------------------------------------------------------------

fn covering() -> Verdict {
    let config = GameConfig::classic(8).unwrap();
    let alice = alice_naive(8).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [1, 2] {
        let occ = enumerate_occurring(alice.as_ref(), &config, r).unwrap();
        let bound = covering_lower_bound(8, 2, r as u64).unwrap();
        let sized = occ
            .family
            .masks()
            .iter()
            .all(|s| s.count_ones() as usize == 2 * r);
        pass &=
            sized && check_covering(&occ.family, 2, r) && BigUint::from(occ.family.len()) >= bound;
        parts.push(format!("r={r}: {} sets, bound {bound}", occ.family.len()));
    }
    verdict(pass, parts.join("; "))
}

// 9 -------------------------------------------------------------------------

fn random_modtown(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<u64> {
    let mut family: Vec<u64> = Vec::new();
    let target = rng.random_range(1..=8);
    for _ in 0..200 {
        if family.len() == target {
            break;
        }
        let size = m * rng.random_range(1..=n / m);
        let mut ground: Vec<usize> = (0..n).collect();
        ground.shuffle(rng);
        let s = ground[..size].iter().fold(0u64, |acc, &i| acc | 1 << i);
        if family
            .iter()
            .all(|&t| t != s && !((s & t).count_ones() as usize).is_multiple_of(m))
        {
            family.push(s);
        }
    }
    family
}

/// A set that breaks the Modtown conditions against `family`: one meeting a
/// member in a multiple of m when such a set exists and `clash` is asked
/// for, otherwise a singleton, whose size is never a multiple of m.
fn spoiler(rng: &mut ChaCha8Rng, family: &[u64], n: usize, m: usize, clash: bool) -> u64 {
    if clash {
        for _ in 0..10_000 {
            let s: u64 = rng.random::<u64>() & ((1 << n) - 1);
            if s != 0
                && !family.contains(&s)
                && (s.count_ones() as usize).is_multiple_of(m)
                && family
                    .iter()
                    .any(|&t| ((s & t).count_ones() as usize).is_multiple_of(m))
            {
                return s;
            }
        }
    }
    1 << rng.random_range(0..n)
}

fn mv_construction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut valid_ok = 0;
    let mut rejected = 0;
    for i in 0..100 {
        let m = [2usize, 3, 6][i % 3];
        let n = rng.random_range(m.max(4)..=12);
        let masks = random_modtown(&mut rng, n, m);
        let family = SetFamily::from_masks(n, masks.clone()).unwrap();
        if let Ok(mv) = modtown_to_mv(&family, m as u64) {
            valid_ok += (mv.len() == family.len() && check_mv(&mv) == Ok(true)) as usize;
        }
        let mut broken = masks.clone();
        let bad = spoiler(&mut rng, &masks, n, m, i % 2 == 1);
        broken.insert(rng.random_range(0..=broken.len()), bad);
        let broken = SetFamily::from_masks(n, broken).unwrap();
        rejected += modtown_to_mv(&broken, m as u64).is_err() as usize;
    }
    verdict(
        valid_ok == 100 && rejected == 100,
        format!("{valid_ok}/100 valid families pass, {rejected}/100 invalid rejected"),
    )
}

// 10 ------------------------------------------------------------------------

fn matching() -> Verdict {
    let samples = 30_000u64;
    let mut counts: BTreeMap<Vec<(usize, usize)>, u64> = BTreeMap::new();
    for seed in 0..samples {
        let m = sample_matching(4, seed).unwrap();
        let mut pairs: Vec<(usize, usize)> = (1..=4)
            .map(|x| (x, m.matched(x)))
            .filter(|&(x, y)| x < y)
            .collect();
        pairs.sort();
        *counts.entry(pairs).or_default() += 1;
    }
    let expected = samples as f64 / 3.0;
    let chi: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = ChiSquared::new(2.0).unwrap().sf(chi);

    let mut involutions = 0;
    for i in 0..10_000u64 {
        let n = 2 + 2 * (i as usize % 100);
        let m = sample_matching(n, 1_000_000 + i).unwrap();
        let mut hit = vec![0u8; n + 1];
        let ok = (1..=n).all(|x| {
            let y = m.matched(x);
            hit[y] += 1;
            (1..=n).contains(&y) && y != x && m.matched(y) == x
        }) && hit[1..].iter().all(|&h| h == 1);
        involutions += ok as usize;
    }
    let freqs: Vec<String> = counts
        .values()
        .map(|&c| format!("{:.4}", c as f64 / samples as f64))
        .collect();
    verdict(
        counts.len() == 3 && p > 0.01 && involutions == 10_000,
        format!(
            "frequencies [{}], chi-square {chi:.3}, p = {p:.3}; involution {involutions}/10000",
            freqs.join(", ")
        ),
    )
}

// 11 ------------------------------------------------------------------------

fn reproducibility() -> Verdict {
    let dir = scratch("acceptance");
    let mut failed = Vec::new();
    let cases = subcommand_cases(&dir);
    for (label, argv, stdin) in &cases {
        let first = mirrorlab(argv, stdin.as_deref());
        let second = mirrorlab(argv, stdin.as_deref());
        if first.code != 0 || first.stdout != second.stdout || first.stdout.is_empty() {
            failed.push(*label);
        }
    }
    verdict(
        failed.is_empty(),
        format!(
            "{}/{} invocations identical{}",
            cases.len() - failed.len(),
            cases.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(", differing: {}", failed.join(", "))
            }
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("never-lose", never_lose),
        ("missing-k exactness", missing_k),
        ("rand-log win rate", rand_log),
        ("rand-sqrt win rate", rand_sqrt),
        ("space scaling", space_scaling),
        ("oddtown / even-odd", towns),
        ("eventown size", eventowns),
        ("covering structure", covering),
        ("MV construction", mv_construction),
        ("matching uniformity", matching),
        ("reproducibility", reproducibility),
    ];
    let mut failures = Vec::new();
    let stdout = std::io::stdout();
    stdout.lock().write_all(b"\n").unwrap();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "{} {:>2} {name}: {} [{:.1}s]\n",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        // Bypass libtest capture so the summary is always visible.
        stdout.lock().write_all(line.as_bytes()).unwrap();
        if !v.pass {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "criteria failed: {failures:?}");
}
