//! Ego-network ingestion in the SNAP ego-Facebook text layout, and
//! synthetic social data with known ground truth.
//!
//! A SNAP ego network `<ego>` is five whitespace-delimited files:
//!
//! * `<ego>.edges`: one undirected friendship `a b` per line
//! * `<ego>.circles`: `name member member ...` per line
//! * `<ego>.feat`: `node f_0 ... f_{K-1}` binary features per member
//! * `<ego>.egofeat`: the ego's own `K` features
//! * `<ego>.featnames`: `k name` per feature

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::social::{sigmoid, similarity_vector, PairData, PairSample, SocialTieMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circle {
    pub name: String,
    /// Dense member indices, ascending.
    pub members: Vec<usize>,
}

/// An ego network with members re-indexed densely in ascending original id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoNetwork {
    pub ego: u64,
    /// Dense index → original node id.
    pub node_ids: Vec<u64>,
    pub features: Vec<Vec<u8>>,
    pub ego_features: Vec<u8>,
    pub feature_names: Vec<String>,
    pub circles: Vec<Circle>,
    /// `(a, b)` with `a < b`, sorted, unique.
    pub edges: Vec<(usize, usize)>,
}

impl EgoNetwork {
    pub fn n_members(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn index_of(&self, node: u64) -> Option<usize> {
        self.node_ids.binary_search(&node).ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_members()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    pub fn share_circle(&self, a: usize, b: usize) -> bool {
        self.circles.iter().any(|c| c.members.binary_search(&a).is_ok() && c.members.binary_search(&b).is_ok())
    }

    /// Checks the structural invariants; the loader only produces valid
    /// networks, this guards hand-built ones.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_members();
        let k = self.n_features();
        if !self.node_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("node ids must be strictly ascending".into()));
        }
        if self.features.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.features.len() });
        }
        for row in self.features.iter().chain(std::iter::once(&self.ego_features)) {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, found: row.len() });
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::InvalidInput("feature values must be 0 or 1".into()));
            }
        }
        for c in &self.circles {
            if !c.members.windows(2).all(|w| w[0] < w[1]) || c.members.last().is_some_and(|&m| m >= n) {
                return Err(Error::InvalidInput(format!("circle `{}` has invalid members", c.name)));
            }
        }
        if !self.edges.windows(2).all(|w| w[0] < w[1]) || self.edges.iter().any(|&(a, b)| a >= b || b >= n) {
            return Err(Error::InvalidInput("edges must be sorted unique pairs (a < b) of members".into()));
        }
        Ok(())
    }

    /// Writes the five SNAP files in canonical order. Loading them back
    /// yields an identical network.
    pub fn write_snap(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let join = |v: &[u8]| v.iter().map(u8::to_string).collect::<Vec<_>>().join(" ");
        let mut edges = String::new();
        for &(a, b) in &self.edges {
            writeln!(edges, "{} {}", self.node_ids[a], self.node_ids[b]).unwrap();
        }
        let mut circles = String::new();
        for c in &self.circles {
            write!(circles, "{}", c.name).unwrap();
            for &m in &c.members {
                write!(circles, "\t{}", self.node_ids[m]).unwrap();
            }
            circles.push('\n');
        }
        let mut feat = String::new();
        for (id, row) in self.node_ids.iter().zip(&self.features) {
            writeln!(feat, "{id} {}", join(row)).unwrap();
        }
        let mut names = String::new();
        for (k, name) in self.feature_names.iter().enumerate() {
            writeln!(names, "{k} {name}").unwrap();
        }
        let files = [
            ("edges", edges),
            ("circles", circles),
            ("feat", feat),
            ("egofeat", format!("{}\n", join(&self.ego_features))),
            ("featnames", names),
        ];
        for (ext, text) in files {
            let path = snap_path(dir, self.ego, ext);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// `dense original` per line.
    pub fn id_map_text(&self) -> String {
        let mut s = String::new();
        for (k, id) in self.node_ids.iter().enumerate() {
            writeln!(s, "{k} {id}").unwrap();
        }
        s
    }
}

fn snap_path(dir: &Path, ego: u64, ext: &str) -> PathBuf {
    dir.join(format!("{ego}.{ext}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_tok<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(path, line, format!("invalid {what} `{tok}`")))
}

fn parse_bits<'a>(path: &Path, line: usize, toks: impl Iterator<Item = &'a str>) -> Result<Vec<u8>> {
    toks.map(|t| match t {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(Error::parse(path, line, format!("feature value `{t}` is not 0 or 1"))),
    })
    .collect()
}

/// Non-empty lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn load_ego_facebook(dir: &Path, ego: u64) -> Result<EgoNetwork> {
    let p_names = snap_path(dir, ego, "featnames");
    let mut feature_names = Vec::new();
    for (n, l) in lines(&read(&p_names)?) {
        let (k, name) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let k: usize = parse_tok(&p_names, n, k, "feature index")?;
        if k != feature_names.len() {
            return Err(Error::parse(&p_names, n, format!("expected feature index {}, found {k}", feature_names.len())));
        }
        feature_names.push(name.trim().to_string());
    }
    let k = feature_names.len();

    let p_ego = snap_path(dir, ego, "egofeat");
    let ego_text = read(&p_ego)?;
    let (ego_line, ego_row) = lines(&ego_text).next().unwrap_or((1, ""));
    let ego_features = parse_bits(&p_ego, ego_line, ego_row.split_whitespace())?;
    if ego_features.len() != k {
        return Err(Error::parse(&p_ego, ego_line, format!("expected {k} features, found {}", ego_features.len())));
    }

    let p_feat = snap_path(dir, ego, "feat");
    let mut rows: BTreeMap<u64, Vec<u8>> = BTreeMap::new();
    for (n, l) in lines(&read(&p_feat)?) {
        let mut toks = l.split_whitespace();
        let id: u64 = parse_tok(&p_feat, n, toks.next().unwrap(), "node id")?;
        let row = parse_bits(&p_feat, n, toks)?;
        if row.len() != k {
            return Err(Error::parse(&p_feat, n, format!("expected {k} features, found {}", row.len())));
        }
        if rows.insert(id, row).is_some() {
            return Err(Error::parse(&p_feat, n, format!("duplicate node {id}")));
        }
    }
    let node_ids: Vec<u64> = rows.keys().copied().collect();
    let features: Vec<Vec<u8>> = rows.into_values().collect();
    let index: HashMap<u64, usize> = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let member = |path: &Path, n: usize, tok: &str| -> Result<usize> {
        let id: u64 = parse_tok(path, n, tok, "node id")?;
        index.get(&id).copied().ok_or_else(|| Error::parse(path, n, format!("node {id} has no feature row")))
    };

    let p_edges = snap_path(dir, ego, "edges");
    let mut edges = BTreeSet::new();
    for (n, l) in lines(&read(&p_edges)?) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(&p_edges, n, "expected `a b`"));
        }
        let (a, b) = (member(&p_edges, n, toks[0])?, member(&p_edges, n, toks[1])?);
        if a == b {
            return Err(Error::parse(&p_edges, n, "self loop"));
        }
        edges.insert((a.min(b), a.max(b)));
    }

    let p_circles = snap_path(dir, ego, "circles");
    let mut circles = Vec::new();
    for (n, l) in lines(&read(&p_circles)?) {
        let mut toks = l.split_whitespace();
        let name = toks.next().unwrap().to_string();
        let members: BTreeSet<usize> = toks.map(|t| member(&p_circles, n, t)).collect::<Result<_>>()?;
        circles.push(Circle { name, members: members.into_iter().collect() });
    }

    Ok(EgoNetwork { ego, node_ids, features, ego_features, feature_names, circles, edges: edges.into_iter().collect() })
}

/// The `m` members of highest degree (ties to the lower index), ascending.
pub fn select_users(net: &EgoNetwork, m: usize) -> Result<Vec<usize>> {
    if m > net.n_members() {
        return Err(Error::InvalidInput(format!("cannot select {m} users from {} members", net.n_members())));
    }
    let deg = net.degrees();
    let mut order: Vec<usize> = (0..net.n_members()).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Every ordered pair of `users`, re-indexed to `0..users.len()`. The single
/// interaction is "shares a circle"; its auxiliary feature is the first
/// user's degree in the ego network.
pub fn build_pair_samples(net: &EgoNetwork, users: &[usize]) -> Result<PairData> {
    if let Some(&bad) = users.iter().find(|&&u| u >= net.n_members()) {
        return Err(Error::InvalidInput(format!("member {bad} out of range")));
    }
    let deg = net.degrees();
    let mut samples = Vec::with_capacity(users.len() * users.len().saturating_sub(1));
    for (a, &i) in users.iter().enumerate() {
        for (b, &j) in users.iter().enumerate() {
            if a == b {
                continue;
            }
            samples.push(PairSample {
                i: a,
                j: b,
                similarity: similarity_vector(&net.features[i], &net.features[j])?,
                interactions: vec![net.share_circle(i, j)],
                aux: vec![vec![deg[i] as f64]],
            });
        }
    }
    PairData::new(samples)
}

/// Synthetic pair data with the ties that generated it.
#[derive(Debug, Clone)]
pub struct SynthSocial {
    pub data: PairData,
    /// Latent tie per unordered pair, shared by both orders.
    pub planted: SocialTieMatrix,
    /// Raw (un-normalized) latent per sample.
    pub latent: Vec<f64>,
}

/// Users with `density`-sparse binary attributes; each pair's latent tie is
/// a linear function of attribute co-occurrence plus Gaussian noise, and
/// four interaction types are drawn from the logistic model of the tie.
/// The planted matrix is the latent min–max normalized to `[0, 1]`.
pub fn synth_social(m: usize, density: f64, seed: u64) -> Result<SynthSocial> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput(format!("density {density} must lie in [0, 1]")));
    }
    if m < 2 {
        return Err(Error::InvalidInput("need at least two users".into()));
    }
    const ATTRS: usize = 12;
    const TYPES: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs: Vec<Vec<u8>> = (0..m).map(|_| (0..ATTRS).map(|_| u8::from(rng.random_bool(density))).collect()).collect();
    let w: Vec<f64> = (0..ATTRS).map(|_| rng.random_range(0.5..2.0)).chain(std::iter::once(-1.0)).collect();
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let mut z = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let zeta = similarity_vector(&attrs[i], &attrs[j])?;
            let v = zeta.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise.sample(&mut rng);
            z[i * m + j] = v;
            z[j * m + i] = v;
        }
    }
    // Interaction f: logit = b_f + 3 z, with a constant auxiliary feature.
    let bias: Vec<f64> = (0..TYPES).map(|f| -1.0 - 0.5 * f as f64).collect();
    let mut samples = Vec::with_capacity(m * (m - 1));
    let mut latent = Vec::with_capacity(m * (m - 1));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let v = z[i * m + j];
            let interactions = (0..TYPES).map(|f| rng.random_bool(sigmoid(bias[f] + 3.0 * v))).collect();
            samples.push(PairSample {
                i,
                j,
                similarity: similarity_vector(&attrs[i], &attrs[j])?,
                interactions,
                aux: vec![vec![1.0]; TYPES],
            });
            latent.push(v);
        }
    }
    let off: Vec<f64> = latent.clone();
    let (lo, hi) = off.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let planted = SocialTieMatrix::from_fn(m, |i, j| (z[i * m + j] - lo) / span)?;
    Ok(SynthSocial { data: PairData::new(samples)?, planted, latent })
}

/// Shape of a surrogate ego network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSpec {
    pub members: usize,
    pub features: usize,
    pub circles: usize,
    /// Probability that a member joins any given circle.
    pub circle_rate: f64,
    pub p_edge_shared: f64,
    pub p_edge_other: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { members: 150, features: 224, circles: 32, circle_rate: 0.06, p_edge_shared: 0.3, p_edge_other: 0.02 }
    }
}

/// A random ego network in which circles drive both features and edges.
///
/// Each circle has a handful of signature features that its members carry
/// with high probability; friendships are far likelier inside a circle.
pub fn synth_ego_network(spec: &SurrogateSpec, ego: u64, seed: u64) -> Result<EgoNetwork> {
    let SurrogateSpec { members: n, features: k, circles: c, circle_rate, p_edge_shared, p_edge_other } = *spec;
    for p in [circle_rate, p_edge_shared, p_edge_other] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("probability {p} must lie in [0, 1]")));
        }
    }
    if k == 0 {
        return Err(Error::InvalidInput("need at least one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signature: Vec<Vec<usize>> = (0..c).map(|_| (0..6).map(|_| rng.random_range(0..k)).collect()).collect();
    let mut circles: Vec<Vec<usize>> = vec![Vec::new(); c];
    for i in 0..n {
        for members in circles.iter_mut() {
            if rng.random_bool(circle_rate) {
                members.push(i);
            }
        }
    }
    let mut features = vec![vec![0u8; k]; n];
    for row in features.iter_mut() {
        for f in row.iter_mut() {
            *f = u8::from(rng.random_bool(0.03));
        }
    }
    for (members, sig) in circles.iter().zip(&signature) {
        for &i in members {
            for &f in sig {
                if rng.random_bool(0.7) {
                    features[i][f] = 1;
                }
            }
        }
    }
    let mut in_circle = vec![Vec::new(); n];
    for (ci, members) in circles.iter().enumerate() {
        for &i in members {
            in_circle[i].push(ci);
        }
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let shared = in_circle[a].iter().any(|x| in_circle[b].contains(x));
            if rng.random_bool(if shared { p_edge_shared } else { p_edge_other }) {
                edges.push((a, b));
            }
        }
    }
    let node_ids: Vec<u64> = (0..n as u64).map(|i| ego + 1 + i).collect();
    let net = EgoNetwork {
        ego,
        node_ids,
        features,
        ego_features: (0..k).map(|_| u8::from(rng.random_bool(0.03))).collect(),
        feature_names: (0..k).map(|f| format!("feature;anonymized feature {f}")).collect(),
        circles: circles.into_iter().enumerate().map(|(i, members)| Circle { name: format!("circle{i}"), members }).collect(),
        edges,
    };
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/ego");

    #[test]
    fn fixture_structure() {
        let net = load_ego_facebook(Path::new(FIXTURE), 7).unwrap();
        assert_eq!(net.node_ids, vec![10, 11, 12, 20, 31]);
        assert_eq!(net.n_features(), 3);
        assert_eq!(net.feature_names[1], "gender;anonymized feature 1");
        assert_eq!(net.features[3], vec![0, 1, 1]);
        assert_eq!(net.ego_features, vec![1, 0, 1]);
        assert_eq!(net.edges, vec![(0, 1), (0, 3), (1, 2)]);
        assert_eq!(net.circles.len(), 2);
        assert_eq!(net.circles[0], Circle { name: "circle0".into(), members: vec![0, 1, 3] });
        assert_eq!(net.circles[1].members, vec![2, 4]);
        assert_eq!(net.degrees(), vec![2, 2, 1, 1, 0]);
        assert!(net.share_circle(0, 3));
        assert!(!net.share_circle(0, 4));
    }

    #[test]
    fn fixture_pairs_by_hand() {
        let net = load_ego_facebook(Path::new(FIXTURE), 7).unwrap();
        let data = build_pair_samples(&net, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(data.len(), 20);
        // Shared-circle ordered pairs: {0,1,3} gives 6, {2,4} gives 2.
        assert_eq!(data.samples().iter().filter(|s| s.interactions[0]).count(), 8);
        // Member 4 (node 31) is isolated.
        assert!(data.samples().iter().filter(|s| s.i == 4).all(|s| s.aux[0][0] == 0.0));
        let s = data.samples().iter().find(|s| s.i == 0 && s.j == 3).unwrap();
        assert_eq!(s.similarity, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(s.aux, vec![vec![2.0]]);
    }

    #[test]
    fn duplicate_edges_and_empty_circles() {
        let dir = tempfile::tempdir().unwrap();
        let net = load_ego_facebook(Path::new(FIXTURE), 7).unwrap();
        net.write_snap(dir.path()).unwrap();
        let edges = dir.path().join("7.edges");
        fs::write(&edges, "10 11\n11 10\n10 11\n\n20 10\n11 12\n").unwrap();
        fs::write(dir.path().join("7.circles"), "").unwrap();
        let back = load_ego_facebook(dir.path(), 7).unwrap();
        assert_eq!(back.edges, net.edges);
        assert!(back.circles.is_empty());
    }

    #[test]
    fn errors_name_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let net = load_ego_facebook(Path::new(FIXTURE), 7).unwrap();
        net.write_snap(dir.path()).unwrap();
        fs::write(dir.path().join("7.edges"), "10 11\n10 99\n").unwrap();
        let msg = load_ego_facebook(dir.path(), 7).unwrap_err().to_string();
        assert!(msg.contains("7.edges:2") && msg.contains("99"), "{msg}");

        net.write_snap(dir.path()).unwrap();
        fs::write(dir.path().join("7.feat"), "10 1 0 0\n11 1 0\n").unwrap();
        let msg = load_ego_facebook(dir.path(), 7).unwrap_err().to_string();
        assert!(msg.contains("7.feat:2") && msg.contains("expected 3 features"), "{msg}");

        net.write_snap(dir.path()).unwrap();
        fs::write(dir.path().join("7.feat"), "10 1 0 2\n").unwrap();
        assert!(load_ego_facebook(dir.path(), 7).unwrap_err().to_string().contains("not 0 or 1"));

        net.write_snap(dir.path()).unwrap();
        fs::remove_file(dir.path().join("7.circles")).unwrap();
        assert!(matches!(load_ego_facebook(dir.path(), 7), Err(Error::Io { .. })));
    }

    #[test]
    fn selection_by_degree() {
        let net = load_ego_facebook(Path::new(FIXTURE), 7).unwrap();
        assert_eq!(select_users(&net, 2).unwrap(), vec![0, 1]);
        assert_eq!(select_users(&net, 3).unwrap(), vec![0, 1, 2]);
        assert!(select_users(&net, 6).is_err());
    }

    #[test]
    fn surrogate_round_trips() {
        let spec = SurrogateSpec { members: 40, ..SurrogateSpec::default() };
        let net = synth_ego_network(&spec, 0, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        net.write_snap(dir.path()).unwrap();
        assert_eq!(load_ego_facebook(dir.path(), 0).unwrap(), net);
        assert_eq!(net.n_features(), 224);
        assert_eq!(net.circles.len(), 32);
    }

    #[test]
    fn synthetic_pairs_have_expected_shape() {
        let s = synth_social(10, 0.3, 1).unwrap();
        assert_eq!(s.data.len(), 90);
        assert_eq!(s.latent.len(), 90);
        assert!(s.planted.is_symmetric(0.0));
        assert!((s.planted.max() - 1.0).abs() < 1e-12);
        assert!(synth_social(1, 0.3, 1).is_err());
        assert!(synth_social(5, 1.5, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn loader_round_trip(seed in any::<u64>(), members in 2usize..30, circles in 0usize..6) {
            let spec = SurrogateSpec { members, features: 9, circles, circle_rate: 0.3, ..SurrogateSpec::default() };
            let net = synth_ego_network(&spec, 42, seed).unwrap();
            let dir = tempfile::tempdir().unwrap();
            net.write_snap(dir.path()).unwrap();
            prop_assert_eq!(load_ego_facebook(dir.path(), 42).unwrap(), net.clone());
            let users: Vec<usize> = (0..members.min(6)).collect();
            let data = build_pair_samples(&net, &users).unwrap();
            prop_assert_eq!(data.len(), users.len() * (users.len() - 1));
        }
    }

    #[test]
    fn planted_ties_are_recovered() {
        use crate::social::{infer_ties, TieHyper};
        use crate::stats::spearman;
        for seed in 0..5 {
            let s = synth_social(20, 0.3, seed).unwrap();
            let fit = infer_ties(&s.data, 20, &TieHyper::default(), seed).unwrap();
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for i in 0..20 {
                for j in i + 1..20 {
                    a.push(fit.ties.get(i, j));
                    b.push(s.planted.get(i, j));
                }
            }
            let rho = spearman(&a, &b);
            assert!(rho > 0.8, "seed {seed}: {rho}");
        }
    }
}
