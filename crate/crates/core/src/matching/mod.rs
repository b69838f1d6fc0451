//! The one-to-one matching game between users and resource blocks, with
//! peer effects through social clusters.
//!
//! A *cluster* `C_s` is an SUE `s` together with the UEs currently matched
//! to one of its D2D (`N3`) blocks. UE utilities for D2D blocks depend on
//! who else sits in the cluster, which is what makes the game one with peer
//! effects and why the socially-aware algorithm iterates.

mod deferred;
pub(crate) mod game;
mod sara;
mod stability;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use deferred::{deferred_acceptance, preference_list, DaOutcome, ProposalLog, ProposalRound, Swap};
pub use game::{Game, GameConfig, PeerMemory, Role};
pub use sara::{default_max_rounds, run_sara, RoundRecord, RunTrace, SaraOutcome, TraceEvent};
pub(crate) use sara::play_round;
pub use stability::{is_blocking_pair, verify_s_stability, verify_two_sided_stability, BlockingClass, StabilityReport};

use crate::error::{Error, Result};
use crate::phy::RBlock;

/// Partial one-to-one map between block ids and user ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    rb_to_user: Vec<Option<usize>>,
    user_to_rb: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_rbs: usize, n_users: usize) -> Self {
        Self { rb_to_user: vec![None; n_rbs], user_to_rb: vec![None; n_users] }
    }

    pub fn from_pairs(n_rbs: usize, n_users: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::empty(n_rbs, n_users);
        for (rb, user) in pairs {
            m.assign(rb, user)?;
        }
        Ok(m)
    }

    pub fn assign(&mut self, rb: usize, user: usize) -> Result<()> {
        if rb >= self.rb_to_user.len() || user >= self.user_to_rb.len() {
            return Err(Error::InvalidInput(format!("pair (rb {rb}, user {user}) out of range")));
        }
        if let Some(other) = self.rb_to_user[rb] {
            return Err(Error::InvalidInput(format!("rb {rb} already matched to user {other}")));
        }
        if let Some(other) = self.user_to_rb[user] {
            return Err(Error::InvalidInput(format!("user {user} already matched to rb {other}")));
        }
        self.rb_to_user[rb] = Some(user);
        self.user_to_rb[user] = Some(rb);
        Ok(())
    }

    pub fn unassign_user(&mut self, user: usize) {
        if let Some(rb) = self.user_to_rb[user].take() {
            self.rb_to_user[rb] = None;
        }
    }

    pub fn rb_of(&self, user: usize) -> Option<usize> {
        self.user_to_rb[user]
    }

    pub fn user_of(&self, rb: usize) -> Option<usize> {
        self.rb_to_user[rb]
    }

    pub fn n_rbs(&self) -> usize {
        self.rb_to_user.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_to_rb.len()
    }

    /// `(rb, user)` pairs in block order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rb_to_user.iter().enumerate().filter_map(|(rb, u)| u.map(|u| (rb, u)))
    }

    pub fn len(&self) -> usize {
        self.pairs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both directions agree.
    pub fn is_consistent(&self) -> bool {
        self.pairs().all(|(rb, u)| self.user_to_rb[u] == Some(rb))
            && self
                .user_to_rb
                .iter()
                .enumerate()
                .all(|(u, rb)| rb.is_none_or(|rb| self.rb_to_user[rb] == Some(u)))
    }
}

/// `(cluster_of, persistent_in, departed)` of a [`MatchState`].
pub type Coefficients<'a> = (&'a [Option<usize>], &'a [Option<usize>], &'a BTreeSet<(usize, usize)>);

/// Game state between rounds: the current and previous matchings and the
/// cluster memberships they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchState {
    pub current: Matching,
    pub previous: Matching,
    pub round: usize,
    /// Per user, the SUE whose cluster it is in under `current` (`a_{m,s;μ}`).
    cluster_of: Vec<Option<usize>>,
    /// Per user, the SUE whose cluster it is in under both `current` and
    /// `previous` (`a_{m,s;μμ'}`), minus peers the game has learned to ignore.
    persistent_in: Vec<Option<usize>>,
    /// `(user, sue)` pairs where the user has left that SUE's cluster at
    /// some point of the run.
    departed: BTreeSet<(usize, usize)>,
}

impl MatchState {
    pub fn new(game: &Game, current: Matching, previous: Matching, round: usize) -> Self {
        Self::with_history(game, current, previous, round, BTreeSet::new())
    }

    fn with_history(
        game: &Game,
        current: Matching,
        previous: Matching,
        round: usize,
        mut departed: BTreeSet<(usize, usize)>,
    ) -> Self {
        let cluster_of = game.cluster_membership(&current);
        let before = game.cluster_membership(&previous);
        for (u, (now, then)) in cluster_of.iter().zip(&before).enumerate() {
            if let Some(s) = then {
                if now != then {
                    departed.insert((u, *s));
                }
            }
        }
        let sticky = game.config().peer_memory == PeerMemory::IgnoreDeparted;
        let persistent_in = cluster_of
            .iter()
            .zip(&before)
            .enumerate()
            .map(|(u, (a, b))| match a {
                Some(s) if a == b && !(sticky && departed.contains(&(u, *s))) => Some(*s),
                _ => None,
            })
            .collect();
        Self { current, previous, round, cluster_of, persistent_in, departed }
    }

    /// The state after `next` is played from this one; departures accumulate.
    pub fn advance(&self, game: &Game, next: Matching, round: usize) -> Self {
        Self::with_history(game, next, self.current.clone(), round, self.departed.clone())
    }

    pub fn departed(&self) -> &BTreeSet<(usize, usize)> {
        &self.departed
    }

    /// Nothing matched, no history.
    pub fn initial(game: &Game) -> Self {
        let empty = Matching::empty(game.catalog().len(), game.n_users());
        Self::new(game, empty.clone(), empty, 0)
    }

    /// A one-shot allocation viewed as a settled state.
    pub fn settled(game: &Game, matching: Matching) -> Self {
        Self::new(game, matching.clone(), matching, 1)
    }

    pub fn cluster_of(&self, user: usize) -> Option<usize> {
        self.cluster_of[user]
    }

    pub fn cluster_of_all(&self) -> &[Option<usize>] {
        &self.cluster_of
    }

    pub fn persistent_in(&self, user: usize) -> Option<usize> {
        self.persistent_in[user]
    }

    /// Cluster coefficients that drive utilities, plus the departure memory
    /// that shapes future ones. Equal signatures imply identical preferences
    /// in the next round.
    pub fn coefficients(&self) -> Coefficients<'_> {
        (&self.cluster_of, &self.persistent_in, &self.departed)
    }

    /// UE members of each SUE's cluster (SUEs with no members map to an empty set).
    pub fn clusters(&self, sues: &[usize]) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut out: BTreeMap<usize, BTreeSet<usize>> = sues.iter().map(|&s| (s, BTreeSet::new())).collect();
        for (u, c) in self.cluster_of.iter().enumerate() {
            if let Some(s) = c {
                out.entry(*s).or_default().insert(u);
            }
        }
        out
    }
}

/// Serializable snapshot of a final state, keyed by blocks rather than ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub round: usize,
    pub current: Vec<(RBlock, usize)>,
    pub previous: Vec<(RBlock, usize)>,
    /// `(user, sue)` departures remembered by the run.
    #[serde(default)]
    pub departed: Vec<(usize, usize)>,
}

impl StateSnapshot {
    pub fn capture(game: &Game, state: &MatchState) -> Self {
        let pairs = |m: &Matching| m.pairs().map(|(rb, u)| (game.catalog().get(rb), u)).collect();
        Self {
            round: state.round,
            current: pairs(&state.current),
            previous: pairs(&state.previous),
            departed: state.departed.iter().copied().collect(),
        }
    }

    pub fn restore(&self, game: &Game) -> Result<MatchState> {
        let build = |pairs: &[(RBlock, usize)]| -> Result<Matching> {
            let mut m = Matching::empty(game.catalog().len(), game.n_users());
            for (rb, u) in pairs {
                let id = game
                    .catalog()
                    .id_of(rb)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown resource block {rb:?}")))?;
                if !game.compatible(id, *u) {
                    return Err(Error::InvalidInput(format!("user {u} cannot use block {rb:?}")));
                }
                m.assign(id, *u)?;
            }
            Ok(m)
        };
        if let Some(&(u, s)) = self.departed.iter().find(|&&(u, s)| u >= game.n_users() || game.role(s) != Role::Sue) {
            return Err(Error::InvalidInput(format!("departure record ({u}, {s}) does not name a user and an SUE")));
        }
        let departed = self.departed.iter().copied().collect();
        Ok(MatchState::with_history(game, build(&self.current)?, build(&self.previous)?, self.round, departed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_is_injective() {
        let mut m = Matching::empty(3, 3);
        m.assign(0, 1).unwrap();
        assert!(m.assign(0, 2).is_err());
        assert!(m.assign(1, 1).is_err());
        m.assign(2, 0).unwrap();
        assert!(m.is_consistent());
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 1), (2, 0)]);
        m.unassign_user(1);
        assert_eq!(m.user_of(0), None);
        assert_eq!(m.len(), 1);
    }
}
