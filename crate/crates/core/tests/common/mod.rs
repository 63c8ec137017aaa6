#![allow(dead_code)]

pub mod cli;

use std::sync::{Arc, Mutex};

use mirrorlab::engine::{push_uint, StateBits, Tape};
use mirrorlab::{run_game, GameConfig, Player, Strategy, Transcript};

/// Opponent that follows a script of choice indices into its sorted unsaid
/// numbers, recording how many options each choice had.
#[derive(Clone)]
struct Chooser {
    n: usize,
    quota: usize,
    said: Vec<bool>,
    script: Arc<Vec<usize>>,
    pos: usize,
    radices: Arc<Mutex<Vec<usize>>>,
}

impl Strategy for Chooser {
    fn name(&self) -> String {
        "chooser".into()
    }

    fn quota(&self) -> usize {
        self.quota
    }

    fn budget_bits(&self) -> u64 {
        self.state_bits()
    }

    fn state_bits(&self) -> u64 {
        self.n as u64 + 32
    }

    fn encode_state(&self) -> StateBits {
        let mut bits: StateBits = self.said.iter().copied().collect();
        push_uint(&mut bits, self.pos as u64, 32);
        bits
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, _tape: &mut Tape) {
        for &x in opponent {
            if (1..=self.n).contains(&x) {
                self.said[x - 1] = true;
            }
        }
    }

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.quota);
        for _ in 0..self.quota {
            let options: Vec<usize> = (1..=self.n).filter(|&x| !self.said[x - 1]).collect();
            let choice = self.script.get(self.pos).copied().unwrap_or(0);
            let mut radices = self.radices.lock().unwrap();
            radices.truncate(self.pos);
            radices.push(options.len().max(1));
            self.pos += 1;
            // Out of fresh numbers: repeating is the only move left.
            let x = options.get(choice).copied().unwrap_or(1);
            self.said[x - 1] = true;
            out.push(x);
        }
        out
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Plays `subject` in `seat` against every legal opponent line and hands
/// each transcript to `check`. Returns the number of lines.
pub fn exhaustive(
    config: &GameConfig,
    seat: Player,
    subject: &dyn Strategy,
    mut check: impl FnMut(&Transcript),
) -> usize {
    let quota = config.quota(seat.opponent());
    let mut script: Vec<usize> = Vec::new();
    let mut lines = 0;
    loop {
        let radices = Arc::new(Mutex::new(Vec::new()));
        let mut opponent: Box<dyn Strategy> = Box::new(Chooser {
            n: config.n(),
            quota,
            said: vec![false; config.n()],
            script: Arc::new(script.clone()),
            pos: 0,
            radices: radices.clone(),
        });
        let mut me = subject.clone_box();
        let transcript = match seat {
            Player::Alice => run_game(me.as_mut(), opponent.as_mut(), config, 0),
            Player::Bob => run_game(opponent.as_mut(), me.as_mut(), config, 0),
        }
        .expect("game runs");
        check(&transcript);
        lines += 1;

        let radices = radices.lock().unwrap().clone();
        script.resize(radices.len(), 0);
        match (0..radices.len())
            .rev()
            .find(|&i| script[i] + 1 < radices[i])
        {
            Some(i) => {
                script.truncate(i + 1);
                script[i] += 1;
            }
            None => return lines,
        }
    }
}

/// Number of ordered sequences of `k` distinct picks from `m`.
pub fn falling(m: usize, k: usize) -> usize {
    (0..k).map(|i| m - i).product()
}
