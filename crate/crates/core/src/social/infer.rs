//! MAP estimation of latent ties by block-coordinate ascent.
//!
//! Each outer iteration maximizes the posterior over one block while the
//! others are held fixed: the similarity weights in closed form (ridge), each
//! pair's latent tie by a scalar Newton solve, and each interaction type's
//! logistic weights by a damped Newton solve. Every block step is accepted
//! only if it does not lower the objective, so the trace is monotone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{
    bernoulli_loglik, dot, interaction_logit, log_posterior, pair_log_density, sigmoid, PairData, TieModelParams,
};
use super::ties::SocialTieMatrix;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TieHyper {
    pub upsilon: f64,
    pub lambda_w: f64,
    pub lambda_rho: f64,
    /// Stop once one outer iteration improves the objective by less than this.
    pub tol_obj: f64,
    pub max_iters: usize,
}

impl Default for TieHyper {
    fn default() -> Self {
        Self { upsilon: 1.0, lambda_w: 0.5, lambda_rho: 0.5, tol_obj: 1e-8, max_iters: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct TieInference {
    pub params: TieModelParams,
    /// Raw MAP tie for each sample, in sample order.
    pub latent: Vec<f64>,
    /// Symmetrized, min–max normalized ties.
    pub ties: SocialTieMatrix,
    /// Objective after initialization and after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const INIT_JITTER: f64 = 1e-3;
const NEWTON_STEPS: usize = 50;
const HALVINGS: usize = 40;

/// Starting point used by [`infer_ties`]: zero similarity weights, unit
/// weight on the tie in every interaction model, plus a small seeded jitter
/// on the interaction weights.
pub fn initial_params(data: &PairData, hyper: &TieHyper, seed: u64) -> TieModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = (0..data.interaction_types())
        .map(|_| {
            let mut r: Vec<f64> = (0..data.aux_dim()).map(|_| 0.0).collect();
            r.push(1.0);
            for v in &mut r {
                *v += rng.random_range(-INIT_JITTER..INIT_JITTER);
            }
            r
        })
        .collect();
    TieModelParams {
        w: vec![0.0; data.similarity_dim()],
        rho,
        upsilon: hyper.upsilon,
        lambda_w: hyper.lambda_w,
        lambda_rho: hyper.lambda_rho,
    }
}

pub fn infer_ties(data: &PairData, n_users: usize, hyper: &TieHyper, seed: u64) -> Result<TieInference> {
    let mut params = initial_params(data, hyper, seed);
    params.validate(data)?;
    let mut z = vec![0.0; data.len()];

    let gram = similarity_gram(data);
    let mut objective = log_posterior(&params, &z, data);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < hyper.max_iters {
        iterations += 1;
        update_w(&mut params, &z, data, &gram);
        update_z(&params, &mut z, data);
        for f in 0..params.rho.len() {
            update_rho(&mut params, f, &z, data);
        }
        let next = log_posterior(&params, &z, data);
        let gain = next - objective;
        objective = next;
        trace.push(objective);
        if gain < hyper.tol_obj {
            converged = true;
            break;
        }
    }

    canonicalize_sign(&mut params, &mut z);
    let ties = tie_matrix(data, &z, n_users)?;
    Ok(TieInference { params, latent: z, ties, objective_trace: trace, iterations, converged })
}

/// The posterior is invariant to flipping the sign of every tie together with
/// the similarity weights and the tie coefficients; pick the orientation in
/// which a stronger tie makes interactions more likely.
fn canonicalize_sign(params: &mut TieModelParams, z: &mut [f64]) {
    let orientation: f64 = params.rho.iter().map(|r| r.last().unwrap()).sum();
    if orientation < 0.0 {
        params.w.iter_mut().for_each(|v| *v = -*v);
        params.rho.iter_mut().for_each(|r| *r.last_mut().unwrap() *= -1.0);
        z.iter_mut().for_each(|v| *v = -*v);
    }
}

fn similarity_gram(data: &PairData) -> DMatrix<f64> {
    let d = data.similarity_dim();
    let mut g = DMatrix::<f64>::zeros(d, d);
    for s in data.samples() {
        let nz: Vec<(usize, f64)> = s.similarity.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        for &(a, va) in &nz {
            for &(b, vb) in &nz {
                g[(a, b)] += va * vb;
            }
        }
    }
    g
}

fn prior_part(params: &TieModelParams, z: &[f64], data: &PairData) -> f64 {
    let sq: f64 = data
        .samples()
        .iter()
        .zip(z)
        .map(|(s, &zk)| {
            let r = dot(&params.w, &s.similarity) - zk;
            r * r
        })
        .sum();
    -sq / (2.0 * params.upsilon) - 0.5 * params.lambda_w * dot(&params.w, &params.w)
}

/// Ridge solution `(ζᵀζ + υλ_w I) w = ζᵀ z`.
fn update_w(params: &mut TieModelParams, z: &[f64], data: &PairData, gram: &DMatrix<f64>) {
    let d = data.similarity_dim();
    let mut a = gram.clone();
    for k in 0..d {
        a[(k, k)] += params.upsilon * params.lambda_w;
    }
    let mut b = DVector::<f64>::zeros(d);
    for (s, &zk) in data.samples().iter().zip(z) {
        for (k, x) in s.similarity.iter().enumerate() {
            b[k] += x * zk;
        }
    }
    let solution = match a.clone().cholesky() {
        Some(ch) => Some(ch.solve(&b)),
        None => a.svd(true, true).solve(&b, 1e-12).ok(),
    };
    let Some(w_new) = solution else { return };
    if w_new.iter().any(|v| !v.is_finite()) {
        return;
    }
    let before = prior_part(params, z, data);
    let old = std::mem::replace(&mut params.w, w_new.iter().copied().collect());
    if prior_part(params, z, data) < before {
        params.w = old;
    }
}

/// Scalar Newton ascent on each pair's tie; the per-pair objective is
/// strictly concave.
fn update_z(params: &TieModelParams, z: &mut [f64], data: &PairData) {
    for (s, zk) in data.samples().iter().zip(z.iter_mut()) {
        let mu = dot(&params.w, &s.similarity);
        let mut cur = *zk;
        let mut val = pair_log_density(params, s, cur);
        for _ in 0..NEWTON_STEPS {
            let mut grad = (mu - cur) / params.upsilon;
            let mut hess = -1.0 / params.upsilon;
            for ((rho_f, aux_f), &y) in params.rho.iter().zip(&s.aux).zip(&s.interactions) {
                let p = sigmoid(interaction_logit(rho_f, aux_f, cur));
                let c = *rho_f.last().unwrap();
                grad += (f64::from(u8::from(y)) - p) * c;
                hess -= p * (1.0 - p) * c * c;
            }
            let mut step = -grad / hess;
            let mut accepted = false;
            for _ in 0..HALVINGS {
                let cand = cur + step;
                let cand_val = pair_log_density(params, s, cand);
                if cand_val >= val {
                    cur = cand;
                    val = cand_val;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() <= 1e-12 * (1.0 + cur.abs()) {
                break;
            }
        }
        *zk = cur;
    }
}

fn rho_objective(rho_f: &[f64], f: usize, lambda: f64, z: &[f64], data: &PairData) -> f64 {
    let ll: f64 = data
        .samples()
        .iter()
        .zip(z)
        .map(|(s, &zk)| bernoulli_loglik(s.interactions[f], interaction_logit(rho_f, &s.aux[f], zk)))
        .sum();
    ll - 0.5 * lambda * dot(rho_f, rho_f)
}

/// Damped Newton ascent on one interaction type's logistic weights.
fn update_rho(params: &mut TieModelParams, f: usize, z: &[f64], data: &PairData) {
    let dim = data.aux_dim() + 1;
    let lambda = params.lambda_rho;
    let mut cur = params.rho[f].clone();
    let mut val = rho_objective(&cur, f, lambda, z, data);
    let mut u = vec![0.0; dim];
    for _ in 0..NEWTON_STEPS {
        let mut grad = DVector::from_iterator(dim, cur.iter().map(|v| -lambda * v));
        let mut neg_hess = DMatrix::<f64>::identity(dim, dim) * lambda;
        for (s, &zk) in data.samples().iter().zip(z) {
            u[..dim - 1].copy_from_slice(&s.aux[f]);
            u[dim - 1] = zk;
            let p = sigmoid(dot(&cur, &u));
            let err = f64::from(u8::from(s.interactions[f])) - p;
            let wgt = p * (1.0 - p);
            for a in 0..dim {
                grad[a] += err * u[a];
                for b in 0..dim {
                    neg_hess[(a, b)] += wgt * u[a] * u[b];
                }
            }
        }
        // Tiny ridge keeps the system solvable when λ_ρ = 0 and the data
        // are separable or degenerate.
        for a in 0..dim {
            neg_hess[(a, a)] += 1e-12;
        }
        let Some(step) = neg_hess.clone().cholesky().map(|c| c.solve(&grad)).or_else(|| neg_hess.lu().solve(&grad))
        else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..HALVINGS {
            let cand: Vec<f64> = cur.iter().zip(step.iter()).map(|(c, s)| c + scale * s).collect();
            let cand_val = rho_objective(&cand, f, lambda, z, data);
            if cand_val >= val {
                cur = cand;
                val = cand_val;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        let norm = scale * step.norm();
        if !accepted || norm <= 1e-12 * (1.0 + cur.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    params.rho[f] = cur;
}

/// Builds the `M×M` matrix: average the two directions of each pair (or take
/// the one observed), then min–max normalize the off-diagonal to `[0, 1]`.
/// Pairs never observed map to 0.
pub fn tie_matrix(data: &PairData, z: &[f64], n_users: usize) -> Result<SocialTieMatrix> {
    let mut sum = vec![0.0; n_users * n_users];
    let mut count = vec![0u32; n_users * n_users];
    for (s, &zk) in data.samples().iter().zip(z) {
        if s.i >= n_users || s.j >= n_users {
            return Err(crate::error::Error::InvalidInput(format!(
                "pair ({}, {}) outside {n_users} users",
                s.i, s.j
            )));
        }
        for (a, b) in [(s.i, s.j), (s.j, s.i)] {
            sum[a * n_users + b] += zk;
            count[a * n_users + b] += 1;
        }
    }
    let observed = |k: usize| (count[k] > 0).then(|| sum[k] / f64::from(count[k]));
    let (lo, hi) = (0..n_users * n_users)
        .filter_map(observed)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    SocialTieMatrix::from_fn(n_users, |i, j| match observed(i * n_users + j) {
        Some(v) if span > 0.0 => ((v - lo) / span).clamp(0.0, 1.0),
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::model::{log_posterior_gradient, PairSample};
    use super::*;

    fn small_data(seed: u64, pairs: usize) -> PairData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..pairs)
            .map(|k| {
                let i = k % 5;
                let j = (i + 1 + k / 5) % 5;
                let j = if j == i { (i + 1) % 5 } else { j };
                PairSample {
                    i,
                    j,
                    similarity: vec![
                        f64::from(u8::from(rng.random_bool(0.5))),
                        f64::from(u8::from(rng.random_bool(0.5))),
                        1.0,
                    ],
                    interactions: vec![rng.random_bool(0.5)],
                    aux: vec![vec![rng.random_range(1.0..5.0)]],
                }
            })
            .collect();
        PairData::new(samples).unwrap()
    }

    #[test]
    fn objective_trace_is_monotone() {
        for seed in 0..50 {
            let data = small_data(seed, 12);
            let inf = infer_ties(&data, 5, &TieHyper::default(), seed).unwrap();
            for w in inf.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn stationary_at_convergence() {
        let data = small_data(3, 15);
        let hyper = TieHyper { tol_obj: 1e-13, max_iters: 5000, ..TieHyper::default() };
        let inf = infer_ties(&data, 5, &hyper, 3).unwrap();
        assert!(inf.converged);
        let g = log_posterior_gradient(&inf.params, &inf.latent, &data);
        let norm = g.w.iter().chain(g.rho.iter().flatten()).chain(&g.z).map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "gradient norm {norm}");
    }

    #[test]
    fn observed_interaction_raises_tie() {
        let make = |y: bool| {
            PairData::new(vec![PairSample { i: 0, j: 1, similarity: vec![1.0, 1.0], interactions: vec![y], aux: vec![vec![1.0]] }])
                .unwrap()
        };
        let hyper = TieHyper { lambda_rho: 1e-3, ..TieHyper::default() };
        let with = infer_ties(&make(true), 2, &hyper, 0).unwrap();
        let without = infer_ties(&make(false), 2, &hyper, 0).unwrap();
        assert!(with.latent[0] > without.latent[0], "{} vs {}", with.latent[0], without.latent[0]);
    }

    #[test]
    fn heavy_ridge_shrinks_weights_and_ties() {
        let data = small_data(9, 20);
        let light = infer_ties(&data, 5, &TieHyper::default(), 1).unwrap();
        let heavy = infer_ties(&data, 5, &TieHyper { lambda_w: 1e9, ..TieHyper::default() }, 1).unwrap();
        assert!(heavy.params.w.iter().all(|w| w.abs() < 1e-6));
        let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        assert!(mean_abs(&heavy.latent) < mean_abs(&light.latent));
    }

    #[test]
    fn tie_matrix_is_symmetric_normalized() {
        let data = small_data(4, 20);
        let inf = infer_ties(&data, 5, &TieHyper::default(), 4).unwrap();
        let z = &inf.ties;
        assert!(z.is_symmetric(0.0));
        for i in 0..5 {
            assert_eq!(z.get(i, i), 0.0);
            for j in 0..5 {
                assert!((0.0..=1.0).contains(&z.get(i, j)));
            }
        }
        assert!(z.max() == 1.0);
    }

    #[test]
    fn unobserved_pairs_are_zero() {
        let data = PairData::new(vec![
            PairSample { i: 0, j: 1, similarity: vec![1.0], interactions: vec![true], aux: vec![vec![1.0]] },
            PairSample { i: 1, j: 2, similarity: vec![1.0], interactions: vec![false], aux: vec![vec![1.0]] },
        ])
        .unwrap();
        let z = tie_matrix(&data, &[2.0, -1.0], 4).unwrap();
        assert_eq!(z.get(0, 1), 1.0);
        assert_eq!(z.get(2, 1), 0.0);
        assert_eq!(z.get(0, 3), 0.0);
    }
}
