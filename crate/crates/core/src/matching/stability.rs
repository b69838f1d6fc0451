//! Blocking-pair scans with cluster coefficients frozen at the given state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Game, MatchState};
use crate::phy::Band;

/// Where a blocking pair sits, by the player's current situation and the
/// block's band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockingClass {
    /// Matched UE and a D2D block.
    UeD2d,
    /// Matched SUE and an `N2` block.
    Sue,
    /// Matched UE and an `N1` block.
    UeCellular,
    /// Unmatched user and any compatible block.
    Unmatched,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub ue_d2d: usize,
    pub sue: usize,
    pub ue_cellular: usize,
    pub unmatched: usize,
    /// `(user, rb)` blocking pairs in scan order.
    pub pairs: Vec<(usize, usize)>,
}

impl StabilityReport {
    pub fn total(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_stable(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn is_blocking_pair(game: &Game, state: &MatchState, user: usize, rb: usize) -> bool {
    if !game.compatible(rb, user) {
        return false;
    }
    let current = state.current.rb_of(user);
    if current == Some(rb) {
        return false;
    }
    game.player_prefers(state, user, rb, current) && game.rb_prefers(state, rb, user, state.current.user_of(rb))
}

fn class_of(game: &Game, state: &MatchState, user: usize, rb: usize) -> BlockingClass {
    if state.current.rb_of(user).is_none() {
        return BlockingClass::Unmatched;
    }
    match game.catalog().get(rb).band {
        Band::N1 => BlockingClass::UeCellular,
        Band::N2 => BlockingClass::Sue,
        Band::N3 => BlockingClass::UeD2d,
    }
}

/// Scans every (user, block) pair not in the matching.
pub fn verify_two_sided_stability(game: &Game, state: &MatchState) -> StabilityReport {
    let mut r = StabilityReport::default();
    for user in 0..game.n_users() {
        for rb in 0..game.catalog().len() {
            if is_blocking_pair(game, state, user, rb) {
                match class_of(game, state, user, rb) {
                    BlockingClass::UeD2d => r.ue_d2d += 1,
                    BlockingClass::Sue => r.sue += 1,
                    BlockingClass::UeCellular => r.ue_cellular += 1,
                    BlockingClass::Unmatched => r.unmatched += 1,
                }
                r.pairs.push((user, rb));
            }
        }
    }
    r
}

/// Per SUE: no outside UE blocks with one of its D2D blocks, and no member
/// blocks with an `N1` block or another SUE's D2D block.
pub fn verify_s_stability(game: &Game, state: &MatchState) -> BTreeMap<usize, bool> {
    let cat = game.catalog();
    game.sues()
        .iter()
        .map(|&s| {
            let stable = game.ues().iter().all(|&m| {
                let inside = state.cluster_of(m) == Some(s);
                (0..cat.len()).all(|rb| {
                    let b = cat.get(rb);
                    let relevant = if inside {
                        b.band == Band::N1 || (b.band == Band::N3 && b.owner != s)
                    } else {
                        b.band == Band::N3 && b.owner == s
                    };
                    !relevant || !is_blocking_pair(game, state, m, rb)
                })
            });
            (s, stable)
        })
        .collect()
}
