//! Seeded experiments over the game engine.
//!
//! Trial `i` of an experiment with master seed `s` plays the game with seed
//! `mix_seed(s, i)`; an oracle-backed strategy gets the matching sampled from
//! `mix_seed(game_seed, ORACLE_STREAM)`. Every trial is therefore a pure
//! function of `(spec, i)`, so serial and parallel runs aggregate identically.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::engine::{
    mix_seed, player_tape, run_game, run_game_observed, EngineError, GameConfig, Outcome, Player,
    Strategy, Tape, Transcript,
};
use crate::setfam::{SetFamError, SetFamily};
use crate::strategies::{sample_matching, MatchingOracle, StrategyError, StrategyName};

/// Stream index used to derive a game's matching-oracle seed.
pub const ORACLE_STREAM: u64 = 0x0AC1E;

/// Largest ground set [`enumerate_occurring`] accepts.
pub const MAX_OCCURRING_N: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    SetFam(#[from] SetFamError),
    #[error("trial {trial}: {player} used {bits} bits in round {round}, budget {budget}")]
    BudgetExceeded {
        trial: u64,
        player: Player,
        round: usize,
        bits: u64,
        budget: u64,
    },
    #[error("ground set size {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid experiment: {0}")]
    InvalidParameter(String),
}

/// What an experiment records besides the aggregate counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Collect {
    pub transcripts: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: GameConfig,
    pub alice: String,
    pub bob: String,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub collect: Collect,
    /// Run trials on the calling thread only.
    #[serde(default)]
    pub serial: bool,
}

impl ExperimentSpec {
    pub fn new(config: GameConfig, alice: &str, bob: &str, trials: u64, master_seed: u64) -> Self {
        Self {
            config,
            alice: alice.to_string(),
            bob: bob.to_string(),
            trials,
            master_seed,
            collect: Collect::default(),
            serial: false,
        }
    }

    fn resolve(&self) -> Result<(StrategyName, StrategyName), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidParameter(
                "trials must be at least 1".into(),
            ));
        }
        let alice: StrategyName = self.alice.parse()?;
        let bob: StrategyName = self.bob.parse()?;
        // Surface construction errors once, before any trial runs.
        build_players(&self.config, &alice, &bob, trial_seed(self.master_seed, 0))?;
        Ok((alice, bob))
    }

    fn trial_indices(&self) -> impl IndexedParallelIterator<Item = u64> {
        (0..self.trials as usize).into_par_iter().map(|i| i as u64)
    }

    /// Runs `work` on a single-thread pool when `serial` is set.
    fn run<R: Send>(&self, work: impl FnOnce() -> R + Send) -> R {
        if self.serial {
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .expect("single-thread pool")
                .install(work)
        } else {
            work()
        }
    }
}

pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    mix_seed(master_seed, index)
}

/// Alice's and Bob's strategies, in that order.
pub type Seats = (Box<dyn Strategy>, Box<dyn Strategy>);

/// Builds both seats for a game played with `game_seed`.
pub fn build_players(
    config: &GameConfig,
    alice: &StrategyName,
    bob: &StrategyName,
    game_seed: u64,
) -> Result<Seats, StrategyError> {
    let oracle = if alice.needs_oracle() || bob.needs_oracle() {
        Some(game_oracle(config.n(), game_seed)?)
    } else {
        None
    };
    Ok((
        alice.build(config, Player::Alice, oracle.clone())?,
        bob.build(config, Player::Bob, oracle)?,
    ))
}

/// The matching oracle shared by the players of the game with `game_seed`.
pub fn game_oracle(n: usize, game_seed: u64) -> Result<Arc<MatchingOracle>, StrategyError> {
    sample_matching(n, mix_seed(game_seed, ORACLE_STREAM)).map(Arc::new)
}

/// Plays one trial of `spec`.
pub fn play_trial(
    spec: &ExperimentSpec,
    alice: &StrategyName,
    bob: &StrategyName,
    index: u64,
) -> Result<Transcript, EngineError> {
    let seed = trial_seed(spec.master_seed, index);
    let (mut a, mut b) = build_players(&spec.config, alice, bob, seed)
        .expect("strategies resolved before the first trial");
    run_game(a.as_mut(), b.as_mut(), &spec.config, seed)
}

/// Why a game ended the way it did, as a stable label.
pub fn loss_cause(transcript: &Transcript) -> Option<String> {
    let loser = match transcript.outcome {
        Outcome::AliceLoses => "alice",
        Outcome::BobLoses => "bob",
        Outcome::BothWin => return None,
    };
    let last = transcript.moves.last()?;
    let x = *last.numbers.last()?;
    let earlier: Vec<(Player, usize)> = transcript.utterance_sequence().collect();
    let earlier = &earlier[..earlier.len() - 1];
    let said: BTreeSet<usize> = earlier.iter().map(|&(_, y)| y).collect();
    let cause = if said.len() == transcript.config.n() {
        "forced"
    } else if earlier.iter().any(|&(p, y)| y == x && p != last.player) {
        "repeat-opponent"
    } else {
        "repeat-own"
    };
    Some(format!("{loser}:{cause}"))
}

fn error_label(e: &EngineError) -> String {
    let kind = match e {
        EngineError::InvalidConfig(_) => "invalid-config",
        EngineError::QuotaMismatch { .. } => "quota-mismatch",
        EngineError::BudgetExceeded { .. } => "budget-exceeded",
        EngineError::MalformedMove { .. } => "malformed-move",
    };
    format!("error:{kind}")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Tally {
    outcomes: BTreeMap<String, u64>,
    causes: BTreeMap<String, u64>,
    alice_wins: u64,
    errors: u64,
}

impl Tally {
    fn record(mut self, result: &Result<Transcript, EngineError>) -> Self {
        match result {
            Ok(t) => {
                *self.outcomes.entry(format!("{:?}", t.outcome)).or_default() += 1;
                if t.outcome != Outcome::AliceLoses {
                    self.alice_wins += 1;
                }
                if let Some(cause) = loss_cause(t) {
                    *self.causes.entry(cause).or_default() += 1;
                }
            }
            Err(e) => {
                self.errors += 1;
                *self.causes.entry(error_label(e)).or_default() += 1;
            }
        }
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        for (k, v) in other.outcomes {
            *self.outcomes.entry(k).or_default() += v;
        }
        for (k, v) in other.causes {
            *self.causes.entry(k).or_default() += v;
        }
        self.alice_wins += other.alice_wins;
        self.errors += other.errors;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: GameConfig,
    pub alice: String,
    pub bob: String,
    pub trials: u64,
    pub master_seed: u64,
    /// Games Alice did not lose.
    pub alice_wins: u64,
    pub win_rate: f64,
    pub ci95: [f64; 2],
    pub ci_method: String,
    pub outcomes: BTreeMap<String, u64>,
    pub losses_by_cause: BTreeMap<String, u64>,
    pub errors: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<Vec<Transcript>>,
}

impl MonteCarloReport {
    /// Binomial standard error of the win rate.
    pub fn sigma(&self) -> f64 {
        (self.win_rate * (1.0 - self.win_rate) / self.trials as f64).sqrt()
    }
}

/// 95% interval for a binomial proportion: Wald interval when both counts
/// are at least 5, Clopper–Pearson otherwise.
pub fn binomial_ci95(successes: u64, trials: u64) -> ([f64; 2], &'static str) {
    let n = trials as f64;
    let k = successes as f64;
    let p = k / n;
    if successes >= 5 && trials - successes >= 5 {
        let half = 1.959_963_984_540_054 * (p * (1.0 - p) / n).sqrt();
        return ([(p - half).max(0.0), (p + half).min(1.0)], "normal");
    }
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive shape")
            .inverse_cdf(0.025)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive shape")
            .inverse_cdf(0.975)
    };
    ([lower, upper], "clopper-pearson")
}

pub fn montecarlo(spec: &ExperimentSpec) -> Result<MonteCarloReport, HarnessError> {
    let (alice, bob) = spec.resolve()?;
    let tally = spec.run(|| {
        spec.trial_indices()
            .map(|i| play_trial(spec, &alice, &bob, i))
            .fold(Tally::default, |t, r| t.record(&r))
            .reduce(Tally::default, Tally::merge)
    });

    let transcripts = spec.collect.transcripts.then(|| {
        spec.run(|| {
            spec.trial_indices()
                .filter_map(|i| play_trial(spec, &alice, &bob, i).ok())
                .collect()
        })
    });

    let (ci95, method) = binomial_ci95(tally.alice_wins, spec.trials);
    Ok(MonteCarloReport {
        config: spec.config,
        alice: alice.to_string(),
        bob: bob.to_string(),
        trials: spec.trials,
        master_seed: spec.master_seed,
        alice_wins: tally.alice_wins,
        win_rate: tally.alice_wins as f64 / spec.trials as f64,
        ci95,
        ci_method: method.to_string(),
        outcomes: tally.outcomes,
        losses_by_cause: tally.causes,
        errors: tally.errors,
        transcripts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerMemory {
    pub strategy: String,
    pub budget_bits: u64,
    pub overall_max_bits: u64,
    /// Max over trials of the state size after each round; index 0 is the
    /// initial state.
    pub per_turn_max_bits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub config: GameConfig,
    pub trials: u64,
    pub master_seed: u64,
    pub alice: PlayerMemory,
    pub bob: PlayerMemory,
}

impl MemoryReport {
    pub fn player(&self, player: Player) -> &PlayerMemory {
        match player {
            Player::Alice => &self.alice,
            Player::Bob => &self.bob,
        }
    }
}

type RoundMaxima = [Vec<u64>; 2];

fn merge_maxima(mut a: RoundMaxima, b: RoundMaxima) -> RoundMaxima {
    for (x, y) in a.iter_mut().zip(b) {
        if x.len() < y.len() {
            x.resize(y.len(), 0);
        }
        for (xi, yi) in x.iter_mut().zip(y) {
            *xi = (*xi).max(yi);
        }
    }
    a
}

/// Plays every trial measuring both players after each transition. A
/// budget violation in any trial is an error naming the trial and round.
pub fn memory_profile(spec: &ExperimentSpec) -> Result<MemoryReport, HarnessError> {
    let (alice, bob) = spec.resolve()?;
    let maxima = spec.run(|| {
        spec.trial_indices()
            .map(|i| -> Result<RoundMaxima, HarnessError> {
                let seed = trial_seed(spec.master_seed, i);
                let (mut a, mut b) = build_players(&spec.config, &alice, &bob, seed)?;
                let mut maxima: RoundMaxima = [Vec::new(), Vec::new()];
                let result = run_game_observed(
                    a.as_mut(),
                    b.as_mut(),
                    &spec.config,
                    seed,
                    &mut |p, round, bits| {
                        let row = &mut maxima[p as usize];
                        if row.len() <= round {
                            row.resize(round + 1, 0);
                        }
                        row[round] = row[round].max(bits);
                    },
                );
                match result {
                    Ok(_) => Ok(maxima),
                    Err(EngineError::BudgetExceeded {
                        player,
                        round,
                        bits,
                        budget,
                    }) => Err(HarnessError::BudgetExceeded {
                        trial: i,
                        player,
                        round,
                        bits,
                        budget,
                    }),
                    Err(e) => Err(e.into()),
                }
            })
            .try_reduce(|| [Vec::new(), Vec::new()], |a, b| Ok(merge_maxima(a, b)))
    })?;

    let (a, b) = build_players(&spec.config, &alice, &bob, trial_seed(spec.master_seed, 0))?;
    let [alice_rows, bob_rows] = maxima;
    let summarize = |s: &dyn Strategy, rows: Vec<u64>| PlayerMemory {
        strategy: s.name(),
        budget_bits: s.budget_bits(),
        overall_max_bits: rows.iter().copied().max().unwrap_or(0),
        per_turn_max_bits: rows,
    };
    Ok(MemoryReport {
        config: spec.config,
        trials: spec.trials,
        master_seed: spec.master_seed,
        alice: summarize(a.as_ref(), alice_rows),
        bob: summarize(b.as_ref(), bob_rows),
    })
}

/// The r-occurring sets of a fixed Alice strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurringFamily {
    pub config: GameConfig,
    pub r: usize,
    pub family: SetFamily,
}

/// Every set that can be exactly the said-set after `r` rounds, over all
/// legal (non-repeating) Bob play against a deterministic Alice. Alice's
/// tape is replayed identically on every branch.
pub fn enumerate_occurring(
    alice: &dyn Strategy,
    config: &GameConfig,
    r: usize,
) -> Result<OccurringFamily, HarnessError> {
    let n = config.n();
    if n > MAX_OCCURRING_N {
        return Err(HarnessError::TooLarge {
            n,
            limit: MAX_OCCURRING_N,
        });
    }
    if r == 0 || r * (config.a() + config.b()) > n {
        return Err(HarnessError::InvalidParameter(format!(
            "r = {r} rounds do not fit in n = {n} with quotas ({}, {})",
            config.a(),
            config.b()
        )));
    }
    if alice.quota() != config.a() {
        return Err(EngineError::QuotaMismatch {
            player: Player::Alice,
            strategy: alice.quota(),
            config: config.a(),
        }
        .into());
    }

    let mut search = OccurringSearch {
        config: *config,
        rounds: r,
        found: BTreeSet::new(),
        visited: HashSet::new(),
    };
    let mut start = alice.clone_box();
    let mut tape = player_tape(0, Player::Alice);
    start.start(&mut tape);
    search.alice_turn(start, tape, 0, 1);

    let family = SetFamily::from_masks(n, search.found.into_iter().collect())?;
    Ok(OccurringFamily {
        config: *config,
        r,
        family,
    })
}

struct OccurringSearch {
    config: GameConfig,
    rounds: usize,
    found: BTreeSet<u64>,
    visited: HashSet<(u64, Vec<u64>)>,
}

impl OccurringSearch {
    fn alice_turn(
        &mut self,
        mut alice: Box<dyn Strategy>,
        mut tape: Tape,
        said: u64,
        round: usize,
    ) {
        let n = self.config.n();
        let mv = alice.respond(round, &mut tape);
        let mut said = said;
        for &x in &mv {
            if x == 0 || x > n || said >> (x - 1) & 1 == 1 {
                return;
            }
            said |= 1 << (x - 1);
        }
        if mv.len() != self.config.a() {
            return;
        }
        let mut bob_move = Vec::with_capacity(self.config.b());
        self.bob_turn(alice.as_ref(), &tape, said, round, &mut bob_move);
    }

    /// Extends Bob's partial move by every fresh number, in every order.
    fn bob_turn(
        &mut self,
        alice: &dyn Strategy,
        tape: &Tape,
        said: u64,
        round: usize,
        bob_move: &mut Vec<usize>,
    ) {
        let n = self.config.n();
        if bob_move.len() == self.config.b() {
            if round == self.rounds {
                self.found.insert(said);
                return;
            }
            let mut next = alice.clone_box();
            let mut tape = tape.clone();
            next.observe(bob_move, round + 1, &mut tape);
            let key = (said, next.encode_state().into_vec());
            if self.visited.insert(key) {
                self.alice_turn(next, tape, said, round + 1);
            }
            return;
        }
        for x in 1..=n {
            if said >> (x - 1) & 1 == 0 {
                bob_move.push(x);
                self.bob_turn(alice, tape, said | 1 << (x - 1), round, bob_move);
                bob_move.pop();
            }
        }
    }
}
