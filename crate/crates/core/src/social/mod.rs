//! Social context: tie-strength inference from profile and interaction data,
//! and selection of serving UEs by social influence.

mod infer;
mod model;
mod ties;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use infer::{infer_ties, initial_params, tie_matrix, TieHyper, TieInference};
pub use model::{
    interaction_probability, log_posterior, log_posterior_gradient, sigmoid, softplus, PairData, PairSample,
    PosteriorGradient, TieModelParams,
};
pub use ties::SocialTieMatrix;

use crate::error::{Error, Result};

/// Co-occurrence indicator per binary attribute (1 when both users have it),
/// followed by a constant bias feature.
pub fn similarity_vector(x_i: &[u8], x_j: &[u8]) -> Result<Vec<f64>> {
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch { expected: x_i.len(), found: x_j.len() });
    }
    let mut v: Vec<f64> = x_i.iter().zip(x_j).map(|(&a, &b)| f64::from(u8::from(a != 0 && b != 0))).collect();
    v.push(1.0);
    Ok(v)
}

/// Weighted degree of every user: its row sum excluding the diagonal.
pub fn influence_scores(z: &SocialTieMatrix) -> Vec<f64> {
    (0..z.len()).map(|i| z.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum()).collect()
}

/// The `count` most influential users, ascending by id. Equal scores go to
/// the lower id.
pub fn select_sues(z: &SocialTieMatrix, count: usize) -> Result<Vec<usize>> {
    if count > z.len() {
        return Err(Error::InvalidInput(format!("cannot select {count} SUEs from {} users", z.len())));
    }
    let scores = influence_scores(z);
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Flat `key = value` rendering of fitted parameters.
pub fn params_to_text(p: &TieModelParams) -> String {
    let mut out = String::new();
    writeln!(out, "upsilon = {}", p.upsilon).unwrap();
    writeln!(out, "lambda_w = {}", p.lambda_w).unwrap();
    writeln!(out, "lambda_rho = {}", p.lambda_rho).unwrap();
    writeln!(out, "w = {}", join(&p.w)).unwrap();
    for (f, r) in p.rho.iter().enumerate() {
        writeln!(out, "rho.{f} = {}", join(r)).unwrap();
    }
    out
}

pub(crate) fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
        if map.insert(k.trim().to_string(), (n + 1, v.trim().to_string())).is_some() {
            return Err(Error::parse(path, n + 1, format!("duplicate key `{}`", k.trim())));
        }
    }
    Ok(map)
}

fn parse_vec(path: &Path, line: usize, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| Error::parse(path, line, e.to_string()))).collect()
}

fn parse_scalar<T: std::str::FromStr>(path: &Path, line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::parse(path, line, format!("`{key}`: {e}")))
}

pub fn params_from_text(text: &str, path: &Path) -> Result<TieModelParams> {
    let mut map = parse_key_values(text, path)?;
    let mut take = |key: &str| map.remove(key).ok_or_else(|| Error::parse(path, 0, format!("missing key `{key}`")));
    let (l, v) = take("upsilon")?;
    let upsilon = parse_scalar(path, l, "upsilon", &v)?;
    let (l, v) = take("lambda_w")?;
    let lambda_w = parse_scalar(path, l, "lambda_w", &v)?;
    let (l, v) = take("lambda_rho")?;
    let lambda_rho = parse_scalar(path, l, "lambda_rho", &v)?;
    let (l, v) = take("w")?;
    let w = parse_vec(path, l, &v)?;
    let mut rho = Vec::new();
    while let Some((l, v)) = map.remove(&format!("rho.{}", rho.len())) {
        rho.push(parse_vec(path, l, &v)?);
    }
    if let Some((key, (line, _))) = map.into_iter().next() {
        return Err(Error::parse(path, line, format!("unknown key `{key}`")));
    }
    Ok(TieModelParams { w, rho, upsilon, lambda_w, lambda_rho })
}

/// Reads learner hyperparameters; absent keys keep their defaults.
pub fn hyper_from_text(text: &str, path: &Path) -> Result<TieHyper> {
    let mut h = TieHyper::default();
    for (key, (line, v)) in parse_key_values(text, path)? {
        match key.as_str() {
            "upsilon" => h.upsilon = parse_scalar(path, line, &key, &v)?,
            "lambda_w" => h.lambda_w = parse_scalar(path, line, &key, &v)?,
            "lambda_rho" => h.lambda_rho = parse_scalar(path, line, &key, &v)?,
            "tol_obj" => h.tol_obj = parse_scalar(path, line, &key, &v)?,
            "max_iters" => h.max_iters = parse_scalar(path, line, &key, &v)?,
            _ => return Err(Error::parse(path, line, format!("unknown key `{key}`"))),
        }
    }
    if !(h.upsilon > 0.0 && h.lambda_w >= 0.0 && h.lambda_rho >= 0.0) {
        return Err(Error::Config("upsilon must be positive and regularizers nonnegative".into()));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity_vector(&[1, 1, 1], &[1, 1, 1]).unwrap(), vec![1.0; 4]);
        assert_eq!(similarity_vector(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(similarity_vector(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn similarity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a: Vec<u8> = (0..20).map(|_| u8::from(rng.random_bool(0.4))).collect();
            let b: Vec<u8> = (0..20).map(|_| u8::from(rng.random_bool(0.4))).collect();
            assert_eq!(similarity_vector(&a, &b).unwrap(), similarity_vector(&b, &a).unwrap());
        }
    }

    #[test]
    fn influence_examples() {
        assert_eq!(influence_scores(&SocialTieMatrix::zeros(4)), vec![0.0; 4]);
        let z = SocialTieMatrix::from_fn(5, |i, _| if i == 2 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(influence_scores(&z)[2], 4.0);
    }

    #[test]
    fn influence_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = SocialTieMatrix::from_fn(9, |_, _| rng.random::<f64>()).unwrap();
        let scores = influence_scores(&z);
        for i in 0..9 {
            let mut direct = 0.0;
            for j in 0..9 {
                if j != i {
                    direct += z.get(i, j);
                }
            }
            assert!((scores[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sue_selection_examples() {
        let z = SocialTieMatrix::from_fn(6, |i, j| ((i + 1) * (j + 1)) as f64 / 36.0).unwrap();
        assert_eq!(select_sues(&z, 2).unwrap(), vec![4, 5]);
        assert_eq!(select_sues(&z, 6).unwrap(), (0..6).collect::<Vec<_>>());
        assert!(select_sues(&z, 7).is_err());
        // all tied → lowest ids
        let flat = SocialTieMatrix::from_fn(5, |_, _| 1.0).unwrap();
        assert_eq!(select_sues(&flat, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn params_text_round_trip() {
        let p = TieModelParams {
            w: vec![0.25, -1.5, 3.0e-7],
            rho: vec![vec![0.1, 2.0], vec![-0.3, 0.9]],
            upsilon: 1.0,
            lambda_w: 0.5,
            lambda_rho: 0.5,
        };
        let back = params_from_text(&params_to_text(&p), Path::new("p.txt")).unwrap();
        assert_eq!(back, p);
        assert!(params_from_text("upsilon = 1\nbogus = 2\n", Path::new("p.txt")).is_err());
    }

    #[test]
    fn hyper_text_rejects_unknown_keys() {
        let h = hyper_from_text("lambda_w = 2\nmax_iters = 10\n", Path::new("h")).unwrap();
        assert_eq!(h.lambda_w, 2.0);
        assert_eq!(h.max_iters, 10);
        let err = hyper_from_text("lamda_w = 2\n", Path::new("h")).unwrap_err();
        assert!(err.to_string().contains("lamda_w"));
    }

    proptest! {
        #[test]
        fn selection_invariant_to_scaling(vals in proptest::collection::vec(0.0f64..1.0, 64), k in 1usize..8, scale in 0.01f64..100.0) {
            let z = SocialTieMatrix::from_fn(8, |i, j| vals[i * 8 + j]).unwrap();
            let scaled = z.scaled(scale).unwrap();
            prop_assert_eq!(select_sues(&z, k).unwrap(), select_sues(&scaled, k).unwrap());
        }
    }
}
