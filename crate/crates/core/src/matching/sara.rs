//! The iterative socially-aware allocation loop.
//!
//! Each round rebuilds both sides' preferences from the cluster coefficients
//! of the previous state, re-runs deferred acceptance for SUEs over `N2` and
//! for UEs over `N1 ∪ N3`, then recomputes clusters. The loop stops once a
//! round reproduces the coefficients it was conditioned on, at which point
//! the matching is stable under its own utilities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::deferred::{deferred_acceptance, preference_list, ProposalLog};
use super::{Game, MatchState, Matching};
use crate::phy::Band;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub sue_stage: ProposalLog,
    pub ue_stage: ProposalLog,
    pub matched: usize,
    /// SUE id → UE members after the round.
    pub clusters: BTreeMap<usize, Vec<usize>>,
}

/// One line of the structured run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: usize,
    pub stage: String,
    pub proposals: usize,
    pub iterations: usize,
    pub matches: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<BTreeMap<usize, Vec<usize>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
}

impl RunTrace {
    pub fn total_proposals(&self) -> usize {
        self.rounds.iter().map(|r| r.sue_stage.total_proposals() + r.ue_stage.total_proposals()).sum()
    }

    /// Three events per round: the two proposal stages and the cluster update.
    pub fn events(&self) -> Vec<TraceEvent> {
        let mut out = Vec::with_capacity(self.rounds.len() * 3);
        for r in &self.rounds {
            for (stage, log) in [("sue_n2", &r.sue_stage), ("ue_n1_n3", &r.ue_stage)] {
                out.push(TraceEvent {
                    round: r.round,
                    stage: stage.into(),
                    proposals: log.total_proposals(),
                    iterations: log.iterations(),
                    matches: log.rounds.iter().map(|p| p.acceptances).sum::<usize>()
                        - log.rounds.iter().map(|p| p.displaced).sum::<usize>(),
                    clusters: None,
                });
            }
            out.push(TraceEvent {
                round: r.round,
                stage: "clusters".into(),
                proposals: 0,
                iterations: 0,
                matches: r.matched,
                clusters: Some(r.clusters.clone()),
            });
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in self.events() {
            writeln!(s, "{}", serde_json::to_string(&e).expect("trace events serialize")).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SaraOutcome {
    pub state: MatchState,
    pub trace: RunTrace,
    pub converged: bool,
}

impl SaraOutcome {
    pub fn rounds(&self) -> usize {
        self.trace.rounds.len()
    }
}

/// Deferred acceptance of `players` over the blocks in `bands`, with
/// utilities read from `state`.
pub(crate) fn stage(game: &Game, state: &MatchState, players: &[usize], bands: &[Band], out: &mut Matching) -> ProposalLog {
    let rbs: Vec<usize> = (0..game.catalog().len()).filter(|&rb| bands.contains(&game.catalog().get(rb).band)).collect();
    let prefs: Vec<Vec<usize>> = players
        .iter()
        .map(|&u| {
            let local = (0..rbs.len()).filter(|&i| game.compatible(rbs[i], u));
            preference_list(local, |i| game.player_utility(state, u, rbs[i]))
        })
        .collect();
    let prefers = |a: usize, x: usize, y: usize| game.rb_prefers(state, rbs[a], players[x], Some(players[y]));
    let da = deferred_acceptance(rbs.len(), &prefs, prefers);
    for (p, a) in da.proposer_match.iter().enumerate() {
        if let Some(a) = a {
            out.assign(rbs[*a], players[p]).expect("deferred acceptance is one-to-one");
        }
    }
    da.log
}

/// Both proposal stages under the coefficients of `state`.
pub(crate) fn play_round(game: &Game, state: &MatchState) -> (Matching, ProposalLog, ProposalLog) {
    let mut m = Matching::empty(game.catalog().len(), game.n_users());
    let sue_log = stage(game, state, game.sues(), &[Band::N2], &mut m);
    let ue_log = stage(game, state, game.ues(), &[Band::N1, Band::N3], &mut m);
    (m, sue_log, ue_log)
}

pub fn default_max_rounds(game: &Game) -> usize {
    (10 * (game.n_users() + game.n_offered_to_ues())).max(1)
}

pub fn run_sara(game: &Game) -> SaraOutcome {
    let cap = game.config().max_rounds.unwrap_or_else(|| default_max_rounds(game));
    let mut state = MatchState::initial(game);
    let mut trace = RunTrace::default();
    let mut converged = false;
    for round in 1..=cap {
        let (m, sue_stage, ue_stage) = play_round(game, &state);
        let next = state.advance(game, m, round);
        trace.rounds.push(RoundRecord {
            round,
            sue_stage,
            ue_stage,
            matched: next.current.len(),
            clusters: next.clusters(game.sues()).into_iter().map(|(s, c)| (s, c.into_iter().collect())).collect(),
        });
        converged = next.coefficients() == state.coefficients();
        state = next;
        if converged {
            break;
        }
    }
    SaraOutcome { state, trace, converged }
}
