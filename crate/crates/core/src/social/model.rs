//! Latent tie-strength model: a Gaussian prior of each pair's tie around a
//! linear function of profile similarity, and logistic interaction
//! likelihoods driven by the tie and per-interaction auxiliary features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations for one ordered pair `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub i: usize,
    pub j: usize,
    /// Similarity features, including the trailing bias term.
    pub similarity: Vec<f64>,
    /// One flag per interaction type.
    pub interactions: Vec<bool>,
    /// Per interaction type, the auxiliary vector `e_ij,f`.
    pub aux: Vec<Vec<f64>>,
}

/// A validated sample set with uniform dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    samples: Vec<PairSample>,
    similarity_dim: usize,
    interaction_types: usize,
    aux_dim: usize,
}

impl PairData {
    pub fn new(samples: Vec<PairSample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidInput("no pair samples".into()));
        };
        let similarity_dim = first.similarity.len();
        let interaction_types = first.interactions.len();
        let aux_dim = first.aux.first().map_or(0, Vec::len);
        for s in &samples {
            if s.similarity.len() != similarity_dim {
                return Err(Error::DimensionMismatch { expected: similarity_dim, found: s.similarity.len() });
            }
            if s.interactions.len() != interaction_types || s.aux.len() != interaction_types {
                return Err(Error::DimensionMismatch {
                    expected: interaction_types,
                    found: s.interactions.len().min(s.aux.len()),
                });
            }
            if let Some(bad) = s.aux.iter().find(|a| a.len() != aux_dim) {
                return Err(Error::DimensionMismatch { expected: aux_dim, found: bad.len() });
            }
            if s.i == s.j {
                return Err(Error::InvalidInput(format!("self pair ({}, {})", s.i, s.j)));
            }
            let finite = s.similarity.iter().chain(s.aux.iter().flatten()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidInput(format!("non-finite feature in pair ({}, {})", s.i, s.j)));
            }
        }
        Ok(Self { samples, similarity_dim, interaction_types, aux_dim })
    }

    pub fn samples(&self) -> &[PairSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn similarity_dim(&self) -> usize {
        self.similarity_dim
    }

    pub fn interaction_types(&self) -> usize {
        self.interaction_types
    }

    pub fn aux_dim(&self) -> usize {
        self.aux_dim
    }

    /// Largest user index referenced, plus one.
    pub fn n_users(&self) -> usize {
        self.samples.iter().map(|s| s.i.max(s.j) + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieModelParams {
    /// Similarity weights.
    pub w: Vec<f64>,
    /// Per interaction type: weights over `[e_ij,f ; z_ij]`.
    pub rho: Vec<Vec<f64>>,
    /// Prior variance of the tie around `w·ζ`.
    pub upsilon: f64,
    pub lambda_w: f64,
    pub lambda_rho: f64,
}

impl TieModelParams {
    pub fn validate(&self, data: &PairData) -> Result<()> {
        if !(self.upsilon.is_finite() && self.upsilon > 0.0) {
            return Err(Error::InvalidInput(format!("prior variance {} must be positive", self.upsilon)));
        }
        if !(self.lambda_w >= 0.0 && self.lambda_rho >= 0.0) {
            return Err(Error::InvalidInput("regularizers must be nonnegative".into()));
        }
        if self.w.len() != data.similarity_dim() {
            return Err(Error::DimensionMismatch { expected: data.similarity_dim(), found: self.w.len() });
        }
        if self.rho.len() != data.interaction_types() {
            return Err(Error::DimensionMismatch { expected: data.interaction_types(), found: self.rho.len() });
        }
        if let Some(r) = self.rho.iter().find(|r| r.len() != data.aux_dim() + 1) {
            return Err(Error::DimensionMismatch { expected: data.aux_dim() + 1, found: r.len() });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `P(y = 1 | u) = 1 / (1 + exp(-ρ·u))`.
pub fn interaction_probability(rho: &[f64], u: &[f64]) -> f64 {
    assert_eq!(rho.len(), u.len(), "parameter and feature lengths differ");
    sigmoid(dot(rho, u))
}

/// Linear predictor `ρ_f · [e_ij,f ; z]`.
#[inline]
pub(crate) fn interaction_logit(rho_f: &[f64], aux_f: &[f64], z: f64) -> f64 {
    let (last, head) = rho_f.split_last().expect("rho has at least the tie coefficient");
    dot(head, aux_f) + last * z
}

/// `y·t − ln(1 + e^t)`, the Bernoulli log-likelihood at logit `t`.
#[inline]
pub(crate) fn bernoulli_loglik(y: bool, t: f64) -> f64 {
    (if y { t } else { 0.0 }) - softplus(t)
}

/// Regularized joint log-density of latent ties and parameters, up to an
/// additive constant. `z[k]` is the tie of `data.samples()[k]`.
pub fn log_posterior(params: &TieModelParams, z: &[f64], data: &PairData) -> f64 {
    assert_eq!(z.len(), data.len(), "one latent value per sample");
    let mut total = 0.0;
    for (s, &zk) in data.samples().iter().zip(z) {
        total += pair_log_density(params, s, zk);
    }
    total - penalty(params)
}

pub(crate) fn pair_log_density(params: &TieModelParams, s: &PairSample, z: f64) -> f64 {
    let resid = dot(&params.w, &s.similarity) - z;
    let mut v = -resid * resid / (2.0 * params.upsilon);
    for ((rho_f, aux_f), &y) in params.rho.iter().zip(&s.aux).zip(&s.interactions) {
        v += bernoulli_loglik(y, interaction_logit(rho_f, aux_f, z));
    }
    v
}

pub(crate) fn penalty(params: &TieModelParams) -> f64 {
    0.5 * params.lambda_w * dot(&params.w, &params.w)
        + params.rho.iter().map(|r| 0.5 * params.lambda_rho * dot(r, r)).sum::<f64>()
}

/// First derivatives of [`log_posterior`] with respect to every block.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGradient {
    pub w: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

pub fn log_posterior_gradient(params: &TieModelParams, z: &[f64], data: &PairData) -> PosteriorGradient {
    assert_eq!(z.len(), data.len(), "one latent value per sample");
    let mut gw: Vec<f64> = params.w.iter().map(|w| -params.lambda_w * w).collect();
    let mut grho: Vec<Vec<f64>> =
        params.rho.iter().map(|r| r.iter().map(|v| -params.lambda_rho * v).collect()).collect();
    let mut gz = Vec::with_capacity(z.len());
    for (s, &zk) in data.samples().iter().zip(z) {
        let resid = zk - dot(&params.w, &s.similarity);
        for (g, x) in gw.iter_mut().zip(&s.similarity) {
            *g += resid * x / params.upsilon;
        }
        let mut dz = -resid / params.upsilon;
        for (f, (rho_f, aux_f)) in params.rho.iter().zip(&s.aux).enumerate() {
            let err = f64::from(u8::from(s.interactions[f])) - sigmoid(interaction_logit(rho_f, aux_f, zk));
            let g = &mut grho[f];
            for (gk, e) in g.iter_mut().zip(aux_f) {
                *gk += err * e;
            }
            *g.last_mut().unwrap() += err * zk;
            dz += err * rho_f.last().unwrap();
        }
        gz.push(dz);
    }
    PosteriorGradient { w: gw, rho: grho, z: gz }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, pairs: usize, dim: usize, f: usize, aux: usize) -> (TieModelParams, Vec<f64>, PairData) {
        let samples = (0..pairs)
            .map(|k| PairSample {
                i: k,
                j: k + 1,
                similarity: (0..dim).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect(),
                interactions: (0..f).map(|_| rng.random_bool(0.4)).collect(),
                aux: (0..f).map(|_| (0..aux).map(|_| rng.random_range(0.0..3.0)).collect()).collect(),
            })
            .collect();
        let data = PairData::new(samples).unwrap();
        let params = TieModelParams {
            w: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rho: (0..f).map(|_| (0..=aux).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
            upsilon: rng.random_range(0.5..2.0),
            lambda_w: rng.random_range(0.0..1.0),
            lambda_rho: rng.random_range(0.0..1.0),
        };
        let z = (0..pairs).map(|_| rng.random_range(-2.0..2.0)).collect();
        (params, z, data)
    }

    #[test]
    fn probability_examples() {
        assert_eq!(interaction_probability(&[1.0, -1.0], &[2.0, 2.0]), 0.5);
        assert!(interaction_probability(&[1.0], &[1e6]) == 1.0);
        assert!(interaction_probability(&[1.0], &[-1e6]) >= 0.0);
        let mut prev = 0.0;
        for k in -50..50 {
            let p = interaction_probability(&[0.3], &[k as f64]);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn probability_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let rho: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let direct = 1.0 / (1.0 + (-(rho[0] * u[0] + rho[1] * u[1] + rho[2] * u[2])).exp());
            assert!((interaction_probability(&rho, &u) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.3) - (1.0 + 0.3f64.exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn penalties_vanish_at_zero_parameters() {
        let data = PairData::new(vec![
            PairSample { i: 0, j: 1, similarity: vec![1.0], interactions: vec![true], aux: vec![vec![2.0]] },
            PairSample { i: 1, j: 0, similarity: vec![0.0], interactions: vec![false], aux: vec![vec![1.0]] },
        ])
        .unwrap();
        let params = TieModelParams { w: vec![0.0], rho: vec![vec![0.0, 0.0]], upsilon: 1.0, lambda_w: 3.0, lambda_rho: 7.0 };
        // z = w·ζ = 0 zeroes the prior term; every logit is 0.
        let v = log_posterior(&params, &[0.0, 0.0], &data);
        assert!((v - 2.0 * (0.5f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_term_matches_expanded_form() {
        // −(1−y)t − ln(1+e^{−t}) equals y·t − ln(1+e^t).
        for &t in &[-5.0, -0.3, 0.0, 0.7, 4.0] {
            for y in [false, true] {
                let expanded = -(1.0 - f64::from(u8::from(y))) * t - (1.0 + (-t).exp()).ln();
                assert!((bernoulli_loglik(y, t) - expanded).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = 1e-6;
        for _ in 0..20 {
            let (params, z, data) = random_instance(&mut rng, 6, 3, 2, 1);
            let g = log_posterior_gradient(&params, &z, &data);
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            for k in 0..params.w.len() {
                let mut p = params.clone();
                p.w[k] += h;
                let up = log_posterior(&p, &z, &data);
                p.w[k] -= 2.0 * h;
                let dn = log_posterior(&p, &z, &data);
                assert!(rel(g.w[k], (up - dn) / (2.0 * h)) < 1e-5);
            }
            for f in 0..params.rho.len() {
                for k in 0..params.rho[f].len() {
                    let mut p = params.clone();
                    p.rho[f][k] += h;
                    let up = log_posterior(&p, &z, &data);
                    p.rho[f][k] -= 2.0 * h;
                    let dn = log_posterior(&p, &z, &data);
                    assert!(rel(g.rho[f][k], (up - dn) / (2.0 * h)) < 1e-5);
                }
            }
            for k in 0..z.len() {
                let mut zz = z.clone();
                zz[k] += h;
                let up = log_posterior(&params, &zz, &data);
                zz[k] -= 2.0 * h;
                let dn = log_posterior(&params, &zz, &data);
                assert!(rel(g.z[k], (up - dn) / (2.0 * h)) < 1e-5);
            }
        }
    }

    #[test]
    fn blockwise_midpoint_concavity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (a, za, data) = random_instance(&mut rng, 5, 3, 1, 1);
            let (mut b, zb, _) = random_instance(&mut rng, 5, 3, 1, 1);
            b.upsilon = a.upsilon;
            b.lambda_w = a.lambda_w;
            b.lambda_rho = a.lambda_rho;
            let mid = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>();
            // w block
            let mut pb = a.clone();
            pb.w = b.w.clone();
            let mut pm = a.clone();
            pm.w = mid(&a.w, &b.w);
            let chord = 0.5 * (log_posterior(&a, &za, &data) + log_posterior(&pb, &za, &data));
            assert!(log_posterior(&pm, &za, &data) >= chord - 1e-12);
            // rho block
            let mut pb = a.clone();
            pb.rho = b.rho.clone();
            let mut pm = a.clone();
            pm.rho = vec![mid(&a.rho[0], &b.rho[0])];
            let chord = 0.5 * (log_posterior(&a, &za, &data) + log_posterior(&pb, &za, &data));
            assert!(log_posterior(&pm, &za, &data) >= chord - 1e-12);
            // z block
            let zm = mid(&za, &zb);
            let chord = 0.5 * (log_posterior(&a, &za, &data) + log_posterior(&a, &zb, &data));
            assert!(log_posterior(&a, &zm, &data) >= chord - 1e-12);
        }
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = PairSample { i: 0, j: 1, similarity: vec![1.0, 1.0], interactions: vec![true], aux: vec![vec![1.0]] };
        let mut b = a.clone();
        b.similarity.pop();
        assert!(PairData::new(vec![a.clone(), b]).is_err());
        let mut c = a.clone();
        c.aux[0].push(2.0);
        assert!(PairData::new(vec![a.clone(), c]).is_err());
        assert!(PairData::new(vec![]).is_err());
        let mut d = a;
        d.j = 0;
        assert!(PairData::new(vec![d]).is_err());
    }
}
