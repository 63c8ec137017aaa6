//! Referee for the (a,b)-mirror game.
//!
//! Alice and Bob alternate, Alice first. Each round Alice utters `a`
//! numbers from `1..=n` and Bob utters `b`. Whoever utters a number that was
//! already said (by anyone, including earlier in the same move) loses
//! immediately. Once every number has been said the game ends with both
//! players winning.
//!
//! Strategies are state machines with a declared bit budget. The referee
//! measures the canonical encoding of each strategy's state after every
//! transition and aborts the game with [`EngineError::BudgetExceeded`] when a
//! strategy outgrows its budget. The random tape, a shared matching oracle and
//! the round index are inputs to the transition and are never charged.

use bitvec::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Read-once random tape handed to strategies.
pub type Tape = ChaCha8Rng;

/// Canonical bit encoding of a strategy state.
pub type StateBits = BitVec<u64, Lsb0>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("{player} strategy has quota {strategy} but the game expects {config}")]
    QuotaMismatch {
        player: Player,
        strategy: usize,
        config: usize,
    },
    #[error("{player} exceeded its memory budget in round {round}: {bits} > {budget} bits")]
    BudgetExceeded {
        player: Player,
        round: usize,
        bits: u64,
        budget: u64,
    },
    #[error("{player} emitted a malformed move in round {round}: {reason}")]
    MalformedMove {
        player: Player,
        round: usize,
        reason: String,
    },
}

/// Parameters of an (a,b)-mirror game on `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct GameConfig {
    n: usize,
    a: usize,
    b: usize,
}

#[derive(Deserialize)]
struct RawConfig {
    n: usize,
    a: usize,
    b: usize,
}

impl TryFrom<RawConfig> for GameConfig {
    type Error = EngineError;

    fn try_from(raw: RawConfig) -> Result<Self, Self::Error> {
        GameConfig::new(raw.n, raw.a, raw.b)
    }
}

impl GameConfig {
    pub fn new(n: usize, a: usize, b: usize) -> Result<Self, EngineError> {
        if n == 0 || a == 0 || b == 0 {
            return Err(EngineError::InvalidConfig(format!(
                "n, a and b must be positive (n={n}, a={a}, b={b})"
            )));
        }
        // The one-element classic game is the only one where a + b may exceed n:
        // Alice's first utterance already ends it.
        if a + b > n && (n, a, b) != (1, 1, 1) {
            return Err(EngineError::InvalidConfig(format!(
                "a + b = {} exceeds n = {n}",
                a + b
            )));
        }
        Ok(Self { n, a, b })
    }

    /// The classic one-number-per-turn game.
    pub fn classic(n: usize) -> Result<Self, EngineError> {
        Self::new(n, 1, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn quota(&self, player: Player) -> usize {
        match player {
            Player::Alice => self.a,
            Player::Bob => self.b,
        }
    }

    /// Upper bound on the number of rounds: ⌈n / (a+b)⌉.
    pub fn max_rounds(&self) -> usize {
        self.n.div_ceil(self.a + self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

impl Player {
    pub fn opponent(self) -> Self {
        match self {
            Player::Alice => Player::Bob,
            Player::Bob => Player::Alice,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Player::Alice => "Alice",
            Player::Bob => "Bob",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    AliceLoses,
    BobLoses,
    BothWin,
}

impl Outcome {
    fn loss_for(player: Player) -> Self {
        match player {
            Player::Alice => Outcome::AliceLoses,
            Player::Bob => Outcome::BobLoses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedMove {
    pub player: Player,
    pub numbers: Vec<usize>,
}

/// Full record of a played game.
///
/// A losing move is truncated right after the repeated number, so the last
/// utterance of the transcript is always the losing one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: GameConfig,
    pub moves: Vec<PlayedMove>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losing_number: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Transcript {
    /// Number of rounds started (a round opens with an Alice move).
    pub fn rounds(&self) -> usize {
        self.moves
            .iter()
            .filter(|m| m.player == Player::Alice)
            .count()
    }

    /// Number of individual utterances, the "turn" count of the (1,1)-game.
    pub fn utterances(&self) -> usize {
        self.moves.iter().map(|m| m.numbers.len()).sum()
    }

    /// All utterances in order, tagged with the speaker.
    pub fn utterance_sequence(&self) -> impl Iterator<Item = (Player, usize)> + '_ {
        self.moves
            .iter()
            .flat_map(|m| m.numbers.iter().map(move |&x| (m.player, x)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// A bounded-memory strategy.
///
/// `observe` is the transition on an opponent move and `respond` emits the
/// next move (it may also fold the emitted move back into the state). Both
/// must be deterministic given their inputs and the bits drawn from `tape`.
pub trait Strategy: Send {
    fn name(&self) -> String;

    /// Numbers emitted per move.
    fn quota(&self) -> usize;

    /// Declared memory budget in bits.
    fn budget_bits(&self) -> u64;

    /// Exact length of [`Strategy::encode_state`].
    fn state_bits(&self) -> u64;

    /// Canonical serialization of the current state.
    fn encode_state(&self) -> StateBits;

    /// Draws the initial state. Deterministic strategies ignore the tape.
    fn start(&mut self, _tape: &mut Tape) {}

    fn observe(&mut self, opponent: &[usize], round: usize, tape: &mut Tape);

    fn respond(&mut self, round: usize, tape: &mut Tape) -> Vec<usize>;

    fn clone_box(&self) -> Box<dyn Strategy>;
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Bits needed for a fixed-width field holding any value in `0..=max`.
pub fn counter_width(max: usize) -> u64 {
    (usize::BITS - max.leading_zeros()) as u64
}

/// Appends `value` to `bits` as a little-endian field of `width` bits.
pub fn push_uint(bits: &mut StateBits, value: u64, width: u64) {
    debug_assert!(
        width >= 64 || value < (1u64 << width),
        "{value} does not fit in {width} bits"
    );
    for i in 0..width {
        bits.push((value >> i) & 1 == 1);
    }
}

/// SplitMix64 finalizer over a (seed, stream) pair.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random tape for `player` in the game played under `seed`.
pub fn player_tape(seed: u64, player: Player) -> Tape {
    let stream = match player {
        Player::Alice => 0xA11CE,
        Player::Bob => 0xB0B,
    };
    Tape::seed_from_u64(mix_seed(seed, stream))
}

/// Size in bits of the strategy's current state under its canonical encoding.
pub fn measure_state(strategy: &dyn Strategy) -> u64 {
    strategy.state_bits()
}

/// Plays one game. See [`run_game_observed`].
pub fn run_game(
    alice: &mut dyn Strategy,
    bob: &mut dyn Strategy,
    config: &GameConfig,
    seed: u64,
) -> Result<Transcript, EngineError> {
    run_game_observed(alice, bob, config, seed, &mut |_, _, _| {})
}

/// Plays one game, reporting `(player, round, state_bits)` to `observer`
/// after every transition. Round 0 is the initial state.
pub fn run_game_observed(
    alice: &mut dyn Strategy,
    bob: &mut dyn Strategy,
    config: &GameConfig,
    seed: u64,
    observer: &mut dyn FnMut(Player, usize, u64),
) -> Result<Transcript, EngineError> {
    for (player, strategy) in [(Player::Alice, &*alice), (Player::Bob, &*bob)] {
        if strategy.quota() != config.quota(player) {
            return Err(EngineError::QuotaMismatch {
                player,
                strategy: strategy.quota(),
                config: config.quota(player),
            });
        }
    }

    let n = config.n();
    let mut alice_tape = player_tape(seed, Player::Alice);
    let mut bob_tape = player_tape(seed, Player::Bob);

    let mut check = |player: Player, strategy: &dyn Strategy, round: usize| {
        let bits = measure_state(strategy);
        observer(player, round, bits);
        let budget = strategy.budget_bits();
        if bits > budget {
            Err(EngineError::BudgetExceeded {
                player,
                round,
                bits,
                budget,
            })
        } else {
            Ok(())
        }
    };

    alice.start(&mut alice_tape);
    check(Player::Alice, alice, 0)?;
    bob.start(&mut bob_tape);
    check(Player::Bob, bob, 0)?;

    let mut said = vec![false; n + 1];
    let mut said_count = 0usize;
    let mut moves: Vec<PlayedMove> = Vec::new();
    let mut last: Option<Vec<usize>> = None;

    for round in 1.. {
        for player in [Player::Alice, Player::Bob] {
            let (strategy, tape): (&mut dyn Strategy, &mut Tape) = match player {
                Player::Alice => (&mut *alice, &mut alice_tape),
                Player::Bob => (&mut *bob, &mut bob_tape),
            };
            if let Some(previous) = last.as_deref() {
                strategy.observe(previous, round, tape);
                check(player, strategy, round)?;
            }
            let mut numbers = strategy.respond(round, tape);
            check(player, strategy, round)?;

            let quota = config.quota(player);
            if numbers.len() != quota {
                return Err(EngineError::MalformedMove {
                    player,
                    round,
                    reason: format!("expected {quota} numbers, got {}", numbers.len()),
                });
            }
            if let Some(&bad) = numbers.iter().find(|&&x| x == 0 || x > n) {
                return Err(EngineError::MalformedMove {
                    player,
                    round,
                    reason: format!("{bad} is outside 1..={n}"),
                });
            }

            let repeat = numbers.iter().position(|&x| {
                if said[x] {
                    true
                } else {
                    said[x] = true;
                    said_count += 1;
                    false
                }
            });
            if let Some(pos) = repeat {
                let losing = numbers[pos];
                numbers.truncate(pos + 1);
                moves.push(PlayedMove { player, numbers });
                return Ok(Transcript {
                    config: *config,
                    moves,
                    outcome: Outcome::loss_for(player),
                    losing_number: Some(losing),
                    seed: Some(seed),
                });
            }
            moves.push(PlayedMove {
                player,
                numbers: numbers.clone(),
            });
            if said_count == n {
                return Ok(Transcript {
                    config: *config,
                    moves,
                    outcome: Outcome::BothWin,
                    losing_number: None,
                    seed: Some(seed),
                });
            }
            last = Some(numbers);
        }
    }
    unreachable!("every move either repeats a number or says a fresh one")
}

/// Re-checks a transcript against the rules. Returns `true` iff the recorded
/// moves are a legal game whose outcome and losing number are the ones stored.
pub fn replay(transcript: &Transcript) -> bool {
    let config = &transcript.config;
    let n = config.n();
    let mut said = vec![false; n + 1];
    let mut said_count = 0usize;

    for (i, m) in transcript.moves.iter().enumerate() {
        let expected_player = if i % 2 == 0 {
            Player::Alice
        } else {
            Player::Bob
        };
        if m.player != expected_player {
            return false;
        }
        let is_last = i + 1 == transcript.moves.len();
        let quota = config.quota(m.player);
        if m.numbers.is_empty() || m.numbers.len() > quota {
            return false;
        }
        for (j, &x) in m.numbers.iter().enumerate() {
            if x == 0 || x > n {
                return false;
            }
            if said[x] {
                // A repeat must be the final utterance of the game.
                return is_last
                    && j + 1 == m.numbers.len()
                    && transcript.outcome == Outcome::loss_for(m.player)
                    && transcript.losing_number == Some(x);
            }
            said[x] = true;
            said_count += 1;
        }
        if m.numbers.len() != quota {
            return false;
        }
        if said_count == n {
            return is_last
                && transcript.outcome == Outcome::BothWin
                && transcript.losing_number.is_none();
        }
    }
    false
}
