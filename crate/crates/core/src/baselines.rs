//! Comparators: the one-shot rate-only matching, exact centralized
//! assignment, and exhaustive oracles for small instances.

use crate::matching::{
    play_round, verify_two_sided_stability, Game, GameConfig, MatchState, Matching, RoundRecord, RunTrace, SaraOutcome,
};

/// A one-to-one assignment of rows to columns. `Option<f64>` cells in the
/// input mark allowed pairs; unassigned rows contribute zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<Option<usize>>,
    pub objective: f64,
}

fn objective(utility: &[Vec<Option<f64>>], row_to_col: &[Option<usize>]) -> f64 {
    row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| utility[r][c].expect("assigned pair is allowed"))).sum()
}

fn n_cols(utility: &[Vec<Option<f64>>]) -> usize {
    let m = utility.first().map_or(0, Vec::len);
    assert!(utility.iter().all(|r| r.len() == m), "utility matrix must be rectangular");
    m
}

/// Maximum-weight one-to-one assignment (Hungarian method with potentials).
///
/// Each row also gets a private zero-weight dummy column, so rows whose
/// best option is negative or forbidden stay unassigned.
pub fn assignment_solve(utility: &[Vec<Option<f64>>]) -> Assignment {
    let n = utility.len();
    let m = n_cols(utility);
    let cols = m + n;
    let cost = |i: usize, j: usize| -> f64 {
        if j < m {
            utility[i][j].map_or(f64::INFINITY, |u| -u)
        } else if j - m == i {
            0.0
        } else {
            f64::INFINITY
        }
    };
    // 1-based arrays; p[j] is the row assigned to column j, 0 for none.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = Some(j - 1);
        }
    }
    let objective = objective(utility, &row_to_col);
    Assignment { row_to_col, objective }
}

/// Exhaustive search over all partial injections. Ties keep the first
/// optimum found (rows unassigned before assigned, lower columns first).
pub fn brute_force_optimal(utility: &[Vec<Option<f64>>]) -> Assignment {
    let n = utility.len();
    let m = n_cols(utility);
    assert!(n <= 8 && m <= 8, "brute force is limited to 8x8");
    fn rec(
        utility: &[Vec<Option<f64>>],
        row: usize,
        used: &mut [bool],
        cur: &mut Vec<Option<usize>>,
        acc: f64,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        if row == utility.len() {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        cur.push(None);
        rec(utility, row + 1, used, cur, acc, best);
        cur.pop();
        for c in 0..used.len() {
            if let (false, Some(w)) = (used[c], utility[row][c]) {
                used[c] = true;
                cur.push(Some(c));
                rec(utility, row + 1, used, cur, acc + w, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(utility, 0, &mut vec![false; m], &mut Vec::with_capacity(n), 0.0, &mut best);
    Assignment { objective: best.0, row_to_col: best.1 }
}

/// Users × blocks matrix of `f(user, rb)` over compatible pairs.
pub fn utility_matrix(game: &Game, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<Option<f64>>> {
    (0..game.n_users())
        .map(|u| (0..game.catalog().len()).map(|rb| game.compatible(rb, u).then(|| f(u, rb))).collect())
        .collect()
}

fn to_matching(game: &Game, a: &Assignment) -> Matching {
    let pairs = a.row_to_col.iter().enumerate().filter_map(|(u, rb)| rb.map(|rb| (rb, u)));
    Matching::from_pairs(game.catalog().len(), game.n_users(), pairs).expect("assignment is one-to-one")
}

/// One round of deferred acceptance on pure rates. Social weights of `game`
/// are ignored.
pub fn context_unaware_matching(game: &Game) -> SaraOutcome {
    let plain = game.clone().with_config(GameConfig::context_unaware()).expect("zero weights are valid");
    let (m, sue_stage, ue_stage) = play_round(&plain, &MatchState::initial(&plain));
    let state = MatchState::settled(game, m);
    let trace = RunTrace {
        rounds: vec![RoundRecord {
            round: 1,
            sue_stage,
            ue_stage,
            matched: state.current.len(),
            clusters: state.clusters(game.sues()).into_iter().map(|(s, c)| (s, c.into_iter().collect())).collect(),
        }],
    };
    SaraOutcome { state, trace, converged: true }
}

/// Maximum sum rate over all band-compatible one-to-one matchings.
pub fn centralized_context_unaware(game: &Game) -> MatchState {
    let a = assignment_solve(&utility_matrix(game, |u, rb| game.rate(rb, u)));
    MatchState::settled(game, to_matching(game, &a))
}

#[derive(Debug, Clone)]
pub struct CentralOutcome {
    pub state: MatchState,
    /// Welfare of `state` with its own clusters as coefficients.
    pub welfare: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before clusters settled; the
    /// best iterate is returned either way.
    pub converged: bool,
}

/// Repeated exact assignment on player utilities, each time conditioned on
/// the clusters of the previous solution, until the clusters repeat.
pub fn centralized_context_aware(game: &Game, max_iters: usize) -> CentralOutcome {
    let mut state = MatchState::initial(game);
    let mut best: Option<(f64, Matching)> = None;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iters.max(1) {
        iterations = it;
        let a = assignment_solve(&utility_matrix(game, |u, rb| game.player_utility(&state, u, rb)));
        let m = to_matching(game, &a);
        let welfare = game.social_welfare(&m);
        if best.as_ref().is_none_or(|(w, _)| welfare > *w) {
            best = Some((welfare, m.clone()));
        }
        let next = MatchState::new(game, m, state.current.clone(), it);
        let settled = next.cluster_of_all() == state.cluster_of_all();
        state = next;
        if settled {
            converged = true;
            break;
        }
    }
    let (welfare, m) = best.expect("at least one iteration");
    CentralOutcome { state: MatchState::settled(game, m), welfare, iterations, converged }
}

/// Every band-compatible matching with no blocking pair, where each
/// candidate is judged with its own clusters as coefficients. Exhaustive;
/// intended for at most 8 users and 8 blocks.
pub fn enumerate_stable_matchings(game: &Game) -> Vec<Matching> {
    let utility = utility_matrix(game, |_, _| 0.0);
    let n_rbs = game.catalog().len();
    assert!(utility.len() <= 8 && n_rbs <= 8, "enumeration is limited to 8x8");
    let mut out = Vec::new();
    let mut cur = Matching::empty(n_rbs, game.n_users());
    fn rec(game: &Game, utility: &[Vec<Option<f64>>], row: usize, cur: &mut Matching, out: &mut Vec<Matching>) {
        if row == utility.len() {
            let st = MatchState::settled(game, cur.clone());
            if verify_two_sided_stability(game, &st).is_stable() {
                out.push(cur.clone());
            }
            return;
        }
        rec(game, utility, row + 1, cur, out);
        for rb in 0..utility[row].len() {
            if utility[row][rb].is_some() && cur.user_of(rb).is_none() {
                cur.assign(rb, row).unwrap();
                rec(game, utility, row + 1, cur, out);
                cur.unassign_user(row);
            }
        }
    }
    rec(game, &utility, 0, &mut cur, &mut out);
    out
}
