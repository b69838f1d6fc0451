//! Proposer-side deferred acceptance, run in synchronous iterations: every
//! free proposer sends one proposal per iteration to the best acceptor it
//! has not yet tried, and every acceptor keeps its best applicant so far.

use serde::{Deserialize, Serialize};

/// Counts for one synchronous proposal iteration.
///
/// `acceptances` and `rejections` partition this iteration's proposals;
/// `displaced` counts holders from earlier iterations that were bumped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalRound {
    pub proposals: usize,
    pub acceptances: usize,
    pub rejections: usize,
    pub displaced: usize,
}

/// An acceptor dropping its held proposer for a new applicant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub iteration: usize,
    pub acceptor: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalLog {
    pub rounds: Vec<ProposalRound>,
    pub swaps: Vec<Swap>,
}

impl ProposalLog {
    pub fn total_proposals(&self) -> usize {
        self.rounds.iter().map(|r| r.proposals).sum()
    }

    pub fn iterations(&self) -> usize {
        self.rounds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaOutcome {
    pub proposer_match: Vec<Option<usize>>,
    pub acceptor_match: Vec<Option<usize>>,
    pub log: ProposalLog,
}

/// Sorts `candidates` by descending utility, breaking ties by ascending id.
pub fn preference_list(candidates: impl IntoIterator<Item = usize>, utility: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = candidates.into_iter().map(|c| (utility(c), c)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// `acceptor_prefers(a, x, y)` must be a strict order on proposers for each
/// acceptor `a`: true iff `a` ranks `x` above `y`. Acceptors rank every
/// applicant above vacancy.
pub fn deferred_acceptance<F>(n_acceptors: usize, proposer_prefs: &[Vec<usize>], acceptor_prefers: F) -> DaOutcome
where
    F: Fn(usize, usize, usize) -> bool,
{
    let n = proposer_prefs.len();
    let mut next = vec![0usize; n];
    let mut proposer_match: Vec<Option<usize>> = vec![None; n];
    let mut acceptor_match: Vec<Option<usize>> = vec![None; n_acceptors];
    let mut log = ProposalLog::default();
    let mut applicants: Vec<Vec<usize>> = vec![Vec::new(); n_acceptors];

    loop {
        let mut round = ProposalRound::default();
        let mut touched = Vec::new();
        for p in 0..n {
            if proposer_match[p].is_some() || next[p] >= proposer_prefs[p].len() {
                continue;
            }
            let a = proposer_prefs[p][next[p]];
            next[p] += 1;
            round.proposals += 1;
            if applicants[a].is_empty() {
                touched.push(a);
            }
            applicants[a].push(p);
        }
        if round.proposals == 0 {
            break;
        }
        let iteration = log.rounds.len();
        for &a in &touched {
            let pool = std::mem::take(&mut applicants[a]);
            let best_new = pool.iter().copied().reduce(|x, y| if acceptor_prefers(a, y, x) { y } else { x }).unwrap();
            round.rejections += pool.len() - 1;
            match acceptor_match[a] {
                Some(held) if !acceptor_prefers(a, best_new, held) => {
                    round.rejections += 1;
                }
                held => {
                    if let Some(old) = held {
                        proposer_match[old] = None;
                        round.displaced += 1;
                        log.swaps.push(Swap { iteration, acceptor: a, from: old, to: best_new });
                    }
                    acceptor_match[a] = Some(best_new);
                    proposer_match[best_new] = Some(a);
                    round.acceptances += 1;
                }
            }
        }
        log.rounds.push(round);
    }
    DaOutcome { proposer_match, acceptor_match, log }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn by_score(scores: &[Vec<f64>]) -> impl Fn(usize, usize, usize) -> bool + '_ {
        move |a, x, y| scores[a][x] > scores[a][y] || (scores[a][x] == scores[a][y] && x < y)
    }

    #[test]
    fn single_pair_matches() {
        let out = deferred_acceptance(1, &[vec![0]], |_, _, _| false);
        assert_eq!(out.proposer_match, vec![Some(0)]);
        assert_eq!(out.log.total_proposals(), 1);
    }

    #[test]
    fn empty_sides() {
        let out = deferred_acceptance(0, &[], |_, _, _| false);
        assert!(out.proposer_match.is_empty());
        assert!(out.log.rounds.is_empty());
        let out = deferred_acceptance(2, &[vec![], vec![]], |_, _, _| false);
        assert_eq!(out.proposer_match, vec![None, None]);
    }

    #[test]
    fn identical_preferences_closed_forms() {
        for (mu, nt) in [(1, 1), (4, 4), (5, 9), (9, 5), (12, 3), (7, 20), (20, 7)] {
            let prefs: Vec<Vec<usize>> = (0..mu).map(|_| (0..nt).collect()).collect();
            let out = deferred_acceptance(nt, &prefs, |_, x, y| x < y);
            let expected = if mu <= nt { mu * (mu + 1) / 2 } else { (mu + 1) * nt - nt * (nt + 1) / 2 };
            assert_eq!(out.log.total_proposals(), expected, "M_u={mu}, N_T={nt}");
            assert_eq!(out.log.iterations(), mu.min(nt));
        }
    }

    #[test]
    fn textbook_instance() {
        // Proposers 0..3, acceptors 0..3.
        let prefs = vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2]];
        let scores = vec![vec![1.0, 3.0, 2.0], vec![3.0, 2.0, 1.0], vec![1.0, 2.0, 3.0]];
        let out = deferred_acceptance(3, &prefs, by_score(&scores));
        assert_eq!(out.proposer_match, vec![Some(1), Some(0), Some(2)]);
        assert_eq!(out.log.swaps.len(), 1);
    }

    #[test]
    fn preference_list_breaks_ties_by_id() {
        let u = [1.0, 3.0, 3.0, 0.5];
        assert_eq!(preference_list(0..4, |c| u[c]), vec![1, 2, 0, 3]);
    }

    proptest! {
        #[test]
        fn outcome_is_stable_and_log_balanced(
            n_p in 0usize..7, n_a in 0usize..7,
            seed_scores in proptest::collection::vec(0.0f64..1.0, 98),
        ) {
            let pu = |p: usize, a: usize| seed_scores[(p * 7 + a) % 49];
            let au = |a: usize, p: usize| seed_scores[49 + (a * 7 + p) % 49];
            let prefs: Vec<Vec<usize>> = (0..n_p).map(|p| preference_list(0..n_a, |a| pu(p, a))).collect();
            let prefers = |a: usize, x: usize, y: usize| au(a, x) > au(a, y) || (au(a, x) == au(a, y) && x < y);
            let out = deferred_acceptance(n_a, &prefs, prefers);
            for r in &out.log.rounds {
                prop_assert_eq!(r.proposals, r.acceptances + r.rejections);
            }
            for (p, m) in out.proposer_match.iter().enumerate() {
                if let Some(a) = m { prop_assert_eq!(out.acceptor_match[*a], Some(p)); }
            }
            prop_assert_eq!(out.proposer_match.iter().flatten().count(), n_p.min(n_a));
            // no blocking pair
            for p in 0..n_p {
                let rank = |a: usize| prefs[p].iter().position(|&x| x == a).unwrap();
                for a in 0..n_a {
                    if out.proposer_match[p] == Some(a) { continue; }
                    let p_wants = out.proposer_match[p].is_none_or(|cur| rank(a) < rank(cur));
                    let a_wants = out.acceptor_match[a].is_none_or(|cur| prefers(a, p, cur));
                    prop_assert!(!(p_wants && a_wants));
                }
            }
            // acceptors only ever trade up
            for s in &out.log.swaps {
                prop_assert!(prefers(s.acceptor, s.to, s.from));
            }
        }
    }
}
