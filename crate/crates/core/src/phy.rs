//! Physical layer: deployment geometry, the three-band spectrum split,
//! Rayleigh channel sampling and SINR / Shannon-rate evaluation.
//!
//! SCBSs reuse the `N1` (to UEs) and `N2` (to SUEs) bands co-channel, and
//! every SUE reuses the `N3` band for D2D. The bands are orthogonal, so
//! SCBSs never interfere with D2D links and vice versa.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node placement for one resource-allocation run.
///
/// Users are indexed `0..M`; `sues` lists (sorted, unique) the users that act
/// as serving UEs. Every other user is a plain UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area_side: f64,
    pub scbs: Vec<Position>,
    pub users: Vec<Position>,
    sues: Vec<usize>,
}

impl Topology {
    pub fn new(
        area_side: f64,
        scbs: Vec<Position>,
        users: Vec<Position>,
        mut sues: Vec<usize>,
    ) -> Result<Self> {
        if !(area_side.is_finite() && area_side > 0.0) {
            return Err(Error::InvalidInput(format!("area side {area_side} must be positive")));
        }
        for p in scbs.iter().chain(users.iter()) {
            let inside = |v: f64| v.is_finite() && (0.0..=area_side).contains(&v);
            if !inside(p.x) || !inside(p.y) {
                return Err(Error::InvalidInput(format!(
                    "position ({}, {}) outside the {area_side} m deployment square",
                    p.x, p.y
                )));
            }
        }
        sues.sort_unstable();
        sues.dedup();
        if let Some(&bad) = sues.iter().find(|&&s| s >= users.len()) {
            return Err(Error::InvalidInput(format!("SUE id {bad} out of range")));
        }
        Ok(Self { area_side, scbs, users, sues })
    }

    /// Uniform placement of SCBSs and users over the square.
    pub fn random<R: Rng + ?Sized>(
        area_side: f64,
        n_scbs: usize,
        n_users: usize,
        sues: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut draw = |n: usize| -> Vec<Position> {
            (0..n)
                .map(|_| Position::new(rng.random::<f64>() * area_side, rng.random::<f64>() * area_side))
                .collect()
        };
        let scbs = draw(n_scbs);
        let users = draw(n_users);
        Self::new(area_side, scbs, users, sues)
    }

    pub fn n_scbs(&self) -> usize {
        self.scbs.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn sues(&self) -> &[usize] {
        &self.sues
    }

    pub fn is_sue(&self, user: usize) -> bool {
        self.sues.binary_search(&user).is_ok()
    }

    /// Plain UEs in ascending id order.
    pub fn ues(&self) -> Vec<usize> {
        (0..self.users.len()).filter(|&m| !self.is_sue(m)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    /// SCBS to UE.
    N1,
    /// SCBS to SUE.
    N2,
    /// SUE to UE (D2D).
    N3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPlan {
    /// RBs per SCBS for SCBS→UE links.
    pub n1: usize,
    /// RBs per SCBS for SCBS→SUE links.
    pub n2: usize,
    /// RBs per SUE for D2D links.
    pub n3: usize,
    pub rb_bandwidth_hz: f64,
}

impl SpectrumPlan {
    /// 12 subcarriers of 15 kHz.
    pub const LTE_RB_HZ: f64 = 180_000.0;

    pub fn new(n1: usize, n2: usize, n3: usize, rb_bandwidth_hz: f64) -> Result<Self> {
        if !(rb_bandwidth_hz.is_finite() && rb_bandwidth_hz > 0.0) {
            return Err(Error::InvalidInput(format!("RB bandwidth {rb_bandwidth_hz} must be positive")));
        }
        Ok(Self { n1, n2, n3, rb_bandwidth_hz })
    }

    pub fn blocks_in(&self, band: Band) -> usize {
        match band {
            Band::N1 => self.n1,
            Band::N2 => self.n2,
            Band::N3 => self.n3,
        }
    }

    /// `N_T`: number of blocks offered to plain UEs (`N1` over all SCBSs plus
    /// `N3` over all SUEs).
    pub fn offered_to_ues(&self, n_scbs: usize, n_sues: usize) -> usize {
        self.n1 * n_scbs + self.n3 * n_sues
    }
}

/// A resource block scoped to its serving node. The derived ordering
/// (band, owner, index) is the player-side tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RBlock {
    pub band: Band,
    /// SCBS index for `N1`/`N2`, SUE user id for `N3`.
    pub owner: usize,
    pub index: usize,
}

impl RBlock {
    pub fn new(band: Band, owner: usize, index: usize) -> Self {
        Self { band, owner, index }
    }

    pub fn serving_node(&self) -> ServingNode {
        match self.band {
            Band::N1 | Band::N2 => ServingNode::Scbs(self.owner),
            Band::N3 => ServingNode::Sue(self.owner),
        }
    }
}

/// Every block of one deployment, in tie-break order. Block ids used across
/// the crate are positions in this list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbCatalog {
    blocks: Vec<RBlock>,
}

impl RbCatalog {
    pub fn new(plan: &SpectrumPlan, n_scbs: usize, sues: &[usize]) -> Self {
        let mut blocks = Vec::new();
        for band in [Band::N1, Band::N2] {
            for l in 0..n_scbs {
                blocks.extend((0..plan.blocks_in(band)).map(|i| RBlock::new(band, l, i)));
            }
        }
        for &s in sues {
            blocks.extend((0..plan.n3).map(|i| RBlock::new(Band::N3, s, i)));
        }
        blocks.sort_unstable();
        Self { blocks }
    }

    pub fn from_blocks(mut blocks: Vec<RBlock>) -> Self {
        blocks.sort_unstable();
        blocks.dedup();
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, id: usize) -> RBlock {
        self.blocks[id]
    }

    pub fn id_of(&self, rb: &RBlock) -> Option<usize> {
        self.blocks.binary_search(rb).ok()
    }

    pub fn blocks(&self) -> &[RBlock] {
        &self.blocks
    }

    pub fn ids_in(&self, band: Band) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().filter(move |(_, b)| b.band == band).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServingNode {
    Scbs(usize),
    /// Identified by user id.
    Sue(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Per-RB transmit power of an SCBS, watts.
    pub scbs_power_w: f64,
    /// Per-RB transmit power of an SUE, watts.
    pub sue_power_w: f64,
    pub pathloss_exponent: f64,
    pub noise_w: f64,
    /// Near-field clamp; `None` rejects co-located transmitter and receiver.
    pub min_distance_m: Option<f64>,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            scbs_power_w: 2.0,
            sue_power_w: 0.01,
            pathloss_exponent: 3.0,
            noise_w: dbm_to_watts(-90.0),
            min_distance_m: Some(1.0),
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.scbs_power_w) || !ok(self.sue_power_w) || !ok(self.pathloss_exponent) {
            return Err(Error::InvalidInput("powers and pathloss exponent must be finite and nonnegative".into()));
        }
        if !(self.noise_w.is_finite() && self.noise_w > 0.0) {
            return Err(Error::InvalidInput(format!("noise variance {} must be positive", self.noise_w)));
        }
        if let Some(d) = self.min_distance_m {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidInput(format!("minimum distance {d} must be positive")));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Distance-based power loss `d^-exponent` with the optional near-field clamp.
pub fn pathloss(distance_m: f64, exponent: f64, min_distance_m: Option<f64>) -> Result<f64> {
    let d = match min_distance_m {
        Some(dmin) => distance_m.max(dmin),
        None => distance_m,
    };
    if d <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(d.powf(-exponent))
}

/// Unit-mean exponential power gain (Rayleigh amplitude).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Linear power gains `h_knm` for every (serving node, block, receiver).
///
/// A block index is shared across owners in the same band, so the gain of
/// interferer `l'` on `(band, index)` towards user `m` is stored under
/// `l'`'s own copy of that block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub radio: RadioParams,
    pub plan: SpectrumPlan,
    n_scbs: usize,
    n_users: usize,
    sues: Vec<usize>,
    n1_gains: Vec<f64>,
    n2_gains: Vec<f64>,
    n3_gains: Vec<f64>,
}

impl ChannelRealization {
    /// Builds a realization by calling `gain` once per (node, band, index,
    /// user), in a fixed order: band `N1`, `N2` (SCBS-major), then `N3`
    /// (SUE-major), index, then user.
    pub fn from_fn<F>(topology: &Topology, plan: &SpectrumPlan, radio: RadioParams, mut gain: F) -> Result<Self>
    where
        F: FnMut(ServingNode, Band, usize, usize) -> Result<f64>,
    {
        radio.validate()?;
        let n_users = topology.n_users();
        let mut fill = |band: Band, nodes: Vec<ServingNode>| -> Result<Vec<f64>> {
            let per = plan.blocks_in(band);
            let mut out = Vec::with_capacity(nodes.len() * per * n_users);
            for node in nodes {
                for idx in 0..per {
                    for m in 0..n_users {
                        let h = gain(node, band, idx, m)?;
                        if !(h.is_finite() && h >= 0.0) {
                            return Err(Error::InvalidInput(format!("channel gain {h} must be finite and nonnegative")));
                        }
                        out.push(h);
                    }
                }
            }
            Ok(out)
        };
        let scbs: Vec<_> = (0..topology.n_scbs()).map(ServingNode::Scbs).collect();
        let sue_nodes: Vec<_> = topology.sues().iter().map(|&s| ServingNode::Sue(s)).collect();
        let n1_gains = fill(Band::N1, scbs.clone())?;
        let n2_gains = fill(Band::N2, scbs)?;
        let n3_gains = fill(Band::N3, sue_nodes)?;
        Ok(Self {
            radio,
            plan: *plan,
            n_scbs: topology.n_scbs(),
            n_users,
            sues: topology.sues().to_vec(),
            n1_gains,
            n2_gains,
            n3_gains,
        })
    }

    pub fn n_scbs(&self) -> usize {
        self.n_scbs
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn sues(&self) -> &[usize] {
        &self.sues
    }

    pub fn gain(&self, rb: &RBlock, user: usize) -> f64 {
        let per = self.plan.blocks_in(rb.band);
        let (gains, node) = match rb.band {
            Band::N1 => (&self.n1_gains, rb.owner),
            Band::N2 => (&self.n2_gains, rb.owner),
            Band::N3 => (
                &self.n3_gains,
                self.sues.binary_search(&rb.owner).unwrap_or_else(|_| panic!("user {} is not an SUE", rb.owner)),
            ),
        };
        gains[(node * per + rb.index) * self.n_users + user]
    }

    pub fn tx_power(&self, band: Band) -> f64 {
        match band {
            Band::N1 | Band::N2 => self.radio.scbs_power_w,
            Band::N3 => self.radio.sue_power_w,
        }
    }

    fn co_channel(&self, rb: &RBlock) -> Vec<RBlock> {
        let owners: Vec<usize> = match rb.band {
            Band::N1 | Band::N2 => (0..self.n_scbs).collect(),
            Band::N3 => self.sues.clone(),
        };
        owners
            .into_iter()
            .filter(|&o| o != rb.owner)
            .map(|o| RBlock::new(rb.band, o, rb.index))
            .collect()
    }

    fn sinr(&self, rb: &RBlock, user: usize, interference: Interference<'_>) -> f64 {
        let p = self.tx_power(rb.band);
        let signal = p * self.gain(rb, user);
        let interference: f64 = self
            .co_channel(rb)
            .iter()
            .filter(|other| interference.is_active(other))
            .map(|other| p * self.gain(other, user))
            .sum();
        signal / (interference + self.radio.noise_w)
    }
}

/// Which co-channel transmitters count as interferers.
#[derive(Debug, Clone, Copy, Default)]
pub enum Interference<'a> {
    /// Every co-channel node is always on.
    #[default]
    WorstCase,
    /// Only blocks present in the set are transmitting.
    ActiveOnly(&'a HashSet<RBlock>),
}

impl Interference<'_> {
    fn is_active(&self, rb: &RBlock) -> bool {
        match self {
            Interference::WorstCase => true,
            Interference::ActiveOnly(set) => set.contains(rb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    #[default]
    WorstCase,
    AssignedOnly,
}

/// Rayleigh-faded pathloss channels for every (node, block, user) triple.
pub fn sample_channels(
    topology: &Topology,
    plan: &SpectrumPlan,
    radio: RadioParams,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelRealization::from_fn(topology, plan, radio, |node, _band, _idx, m| {
        let tx = match node {
            ServingNode::Scbs(l) => topology.scbs[l],
            ServingNode::Sue(s) => topology.users[s],
        };
        let pl = pathloss(tx.distance(&topology.users[m]), radio.pathloss_exponent, radio.min_distance_m)?;
        Ok(pl * sample_fading(&mut rng))
    })
}

/// SINR of an SCBS link on an `N1` or `N2` block.
pub fn sinr_cellular(ch: &ChannelRealization, rb: &RBlock, user: usize, interference: Interference<'_>) -> Result<f64> {
    if rb.band == Band::N3 {
        return Err(Error::WrongBand { expected: "N1 or N2", found: rb.band });
    }
    Ok(ch.sinr(rb, user, interference))
}

/// SINR of a D2D link on an `N3` block.
pub fn sinr_d2d(ch: &ChannelRealization, rb: &RBlock, user: usize, interference: Interference<'_>) -> Result<f64> {
    if rb.band != Band::N3 {
        return Err(Error::WrongBand { expected: "N3", found: rb.band });
    }
    Ok(ch.sinr(rb, user, interference))
}

pub fn sinr(ch: &ChannelRealization, rb: &RBlock, user: usize, interference: Interference<'_>) -> f64 {
    ch.sinr(rb, user, interference)
}

/// Shannon rate in bit/s.
pub fn achievable_rate(bandwidth_hz: f64, sinr: f64) -> Result<f64> {
    if sinr.is_nan() || sinr < 0.0 {
        return Err(Error::NegativeSinr(sinr));
    }
    Ok(bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn plan() -> SpectrumPlan {
        SpectrumPlan::new(2, 1, 2, SpectrumPlan::LTE_RB_HZ).unwrap()
    }

    fn topo(n_scbs: usize, n_users: usize, sues: Vec<usize>, seed: u64) -> Topology {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Topology::random(2000.0, n_scbs, n_users, sues, &mut rng).unwrap()
    }

    /// Gains drawn from a separate stream so the oracle can keep its own copy.
    fn random_gains(topology: &Topology, plan: &SpectrumPlan, radio: RadioParams, seed: u64) -> (ChannelRealization, Vec<(ServingNode, Band, usize, usize, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut log = Vec::new();
        let ch = ChannelRealization::from_fn(topology, plan, radio, |node, band, idx, m| {
            let h = rng.random::<f64>() * 1e-9;
            log.push((node, band, idx, m, h));
            Ok(h)
        })
        .unwrap();
        (ch, log)
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let t = topo(3, 8, vec![1, 4], 9);
        let a = sample_channels(&t, &plan(), RadioParams::default(), 42).unwrap();
        let b = sample_channels(&t, &plan(), RadioParams::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(&t, &plan(), RadioParams::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pathloss_power_law() {
        let a = pathloss(100.0, 3.0, Some(1.0)).unwrap();
        let b = pathloss(200.0, 3.0, Some(1.0)).unwrap();
        assert!((b / a - 0.125).abs() < 1e-15);
        assert_eq!(pathloss(0.0, 3.0, Some(1.0)).unwrap(), 1.0);
        assert!(matches!(pathloss(0.0, 3.0, None), Err(Error::ZeroDistance)));
    }

    #[test]
    fn co_located_nodes_rejected_without_clamp() {
        let t = Topology::new(10.0, vec![Position::new(1.0, 1.0)], vec![Position::new(1.0, 1.0)], vec![]).unwrap();
        let radio = RadioParams { min_distance_m: None, ..RadioParams::default() };
        assert!(matches!(sample_channels(&t, &plan(), radio, 0), Err(Error::ZeroDistance)));
    }

    #[test]
    fn fading_has_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_fading(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn single_scbs_is_snr() {
        let t = topo(1, 3, vec![], 1);
        let ch = sample_channels(&t, &plan(), RadioParams::default(), 7).unwrap();
        let rb = RBlock::new(Band::N1, 0, 1);
        let s = sinr_cellular(&ch, &rb, 2, Interference::WorstCase).unwrap();
        let expected = 2.0 * ch.gain(&rb, 2) / ch.radio.noise_w;
        assert_eq!(s, expected);
    }

    #[test]
    fn symmetric_pair_tends_to_unit_sinr() {
        let t = topo(2, 1, vec![], 1);
        let radio = RadioParams { noise_w: 1e-300, ..RadioParams::default() };
        let ch = ChannelRealization::from_fn(&t, &plan(), radio, |_, _, _, _| Ok(1e-6)).unwrap();
        let s = sinr_cellular(&ch, &RBlock::new(Band::N1, 0, 0), 0, Interference::WorstCase).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cellular_sinr_matches_resummation() {
        let t = topo(3, 5, vec![2], 3);
        let radio = RadioParams::default();
        let (ch, log) = random_gains(&t, &plan(), radio, 11);
        for band in [Band::N1, Band::N2] {
            for l in 0..3 {
                for idx in 0..plan().blocks_in(band) {
                    for m in 0..5 {
                        let h = |node: ServingNode| {
                            log.iter().find(|e| e.0 == node && e.1 == band && e.2 == idx && e.3 == m).unwrap().4
                        };
                        let signal = radio.scbs_power_w * h(ServingNode::Scbs(l));
                        let mut denom = radio.noise_w;
                        for other in (0..3).filter(|&o| o != l) {
                            denom += radio.scbs_power_w * h(ServingNode::Scbs(other));
                        }
                        let oracle = signal / denom;
                        let got = sinr_cellular(&ch, &RBlock::new(band, l, idx), m, Interference::WorstCase).unwrap();
                        assert!(((got - oracle) / oracle).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn d2d_sinr_matches_resummation() {
        let sues = vec![0, 2, 5, 7];
        let t = topo(2, 9, sues.clone(), 4);
        let radio = RadioParams::default();
        let (ch, log) = random_gains(&t, &plan(), radio, 12);
        for &s in &sues {
            for idx in 0..2 {
                for m in 0..9 {
                    let h = |node: ServingNode| {
                        log.iter().find(|e| e.0 == node && e.1 == Band::N3 && e.2 == idx && e.3 == m).unwrap().4
                    };
                    let mut denom = radio.noise_w;
                    for &o in sues.iter().filter(|&&o| o != s) {
                        denom += radio.sue_power_w * h(ServingNode::Sue(o));
                    }
                    let oracle = radio.sue_power_w * h(ServingNode::Sue(s)) / denom;
                    let got = sinr_d2d(&ch, &RBlock::new(Band::N3, s, idx), m, Interference::WorstCase).unwrap();
                    assert!(((got - oracle) / oracle).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_sue_is_snr_and_ignores_scbs_power() {
        let t = topo(2, 4, vec![1], 8);
        let ch = sample_channels(&t, &plan(), RadioParams::default(), 3).unwrap();
        let rb = RBlock::new(Band::N3, 1, 0);
        let s = sinr_d2d(&ch, &rb, 3, Interference::WorstCase).unwrap();
        assert_eq!(s, 0.01 * ch.gain(&rb, 3) / ch.radio.noise_w);

        let loud = RadioParams { scbs_power_w: 1e4, ..RadioParams::default() };
        let ch2 = sample_channels(&t, &plan(), loud, 3).unwrap();
        assert_eq!(sinr_d2d(&ch2, &rb, 3, Interference::WorstCase).unwrap(), s);
    }

    #[test]
    fn wrong_band_rejected() {
        let t = topo(1, 2, vec![0], 1);
        let ch = sample_channels(&t, &plan(), RadioParams::default(), 1).unwrap();
        assert!(matches!(
            sinr_cellular(&ch, &RBlock::new(Band::N3, 0, 0), 1, Interference::WorstCase),
            Err(Error::WrongBand { .. })
        ));
        assert!(matches!(
            sinr_d2d(&ch, &RBlock::new(Band::N1, 0, 0), 1, Interference::WorstCase),
            Err(Error::WrongBand { .. })
        ));
    }

    #[test]
    fn assigned_only_drops_idle_interferers() {
        let t = topo(3, 2, vec![], 2);
        let ch = sample_channels(&t, &plan(), RadioParams::default(), 2).unwrap();
        let rb = RBlock::new(Band::N1, 0, 0);
        let idle = HashSet::new();
        let quiet = sinr_cellular(&ch, &rb, 1, Interference::ActiveOnly(&idle)).unwrap();
        assert_eq!(quiet, 2.0 * ch.gain(&rb, 1) / ch.radio.noise_w);
        let loud = sinr_cellular(&ch, &rb, 1, Interference::WorstCase).unwrap();
        assert!(loud < quiet);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(achievable_rate(180_000.0, 0.0).unwrap(), 0.0);
        assert!((achievable_rate(180_000.0, 1.0).unwrap() - 180_000.0).abs() < 1e-9);
        let r1 = achievable_rate(180_000.0, 1.0).unwrap();
        assert!((achievable_rate(180_000.0, 3.0).unwrap() - 2.0 * r1).abs() < 1e-9);
        assert!(matches!(achievable_rate(1.0, -0.1), Err(Error::NegativeSinr(_))));
    }

    #[test]
    fn catalog_order_is_tie_break_order() {
        let cat = RbCatalog::new(&plan(), 2, &[3, 1]);
        assert_eq!(cat.len(), 2 * 2 + 2 + 2 * 2);
        assert!(cat.blocks().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cat.get(0), RBlock::new(Band::N1, 0, 0));
        assert_eq!(cat.get(cat.len() - 1), RBlock::new(Band::N3, 3, 1));
        assert_eq!(cat.id_of(&RBlock::new(Band::N2, 1, 0)), Some(5));
        assert_eq!(plan().offered_to_ues(2, 2), 8);
    }

    #[test]
    fn topology_rejects_outside_points() {
        assert!(Topology::new(10.0, vec![Position::new(11.0, 0.0)], vec![], vec![]).is_err());
        assert!(Topology::new(10.0, vec![], vec![Position::new(1.0, 1.0)], vec![1]).is_err());
    }

    proptest! {
        #[test]
        fn bands_are_orthogonal(seed in 0u64..500, scale in 1e-3f64..1e3) {
            let t = topo(3, 6, vec![0, 3], seed);
            let base = RadioParams::default();
            let a = sample_channels(&t, &plan(), base, seed).unwrap();
            let louder_scbs = sample_channels(&t, &plan(), RadioParams { scbs_power_w: base.scbs_power_w * scale, ..base }, seed).unwrap();
            let louder_sue = sample_channels(&t, &plan(), RadioParams { sue_power_w: base.sue_power_w * scale, ..base }, seed).unwrap();
            for &s in t.sues() {
                for idx in 0..2 {
                    for m in 0..6 {
                        let rb = RBlock::new(Band::N3, s, idx);
                        prop_assert_eq!(
                            sinr_d2d(&a, &rb, m, Interference::WorstCase).unwrap(),
                            sinr_d2d(&louder_scbs, &rb, m, Interference::WorstCase).unwrap()
                        );
                    }
                }
            }
            for l in 0..3 {
                for m in 0..6 {
                    let rb = RBlock::new(Band::N1, l, 1);
                    prop_assert_eq!(
                        sinr_cellular(&a, &rb, m, Interference::WorstCase).unwrap(),
                        sinr_cellular(&louder_sue, &rb, m, Interference::WorstCase).unwrap()
                    );
                }
            }
        }

        #[test]
        fn sinr_monotone_in_gains(own in 1e-10f64..1e-6, other in 1e-10f64..1e-6, bump in 1.01f64..10.0) {
            let t = topo(2, 1, vec![], 0);
            let build = |g_own: f64, g_other: f64| {
                ChannelRealization::from_fn(&t, &plan(), RadioParams::default(), |node, _, _, _| {
                    Ok(if node == ServingNode::Scbs(0) { g_own } else { g_other })
                }).unwrap()
            };
            let rb = RBlock::new(Band::N1, 0, 0);
            let s = |ch: &ChannelRealization| sinr_cellular(ch, &rb, 0, Interference::WorstCase).unwrap();
            let base = s(&build(own, other));
            prop_assert!(s(&build(own * bump, other)) > base);
            prop_assert!(s(&build(own, other * bump)) < base);
        }

        #[test]
        fn rate_is_linear_in_bandwidth(w in 1.0f64..1e7, s in 0.0f64..1e4, k in 0.1f64..10.0) {
            let r = achievable_rate(w, s).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert_eq!(r == 0.0, s == 0.0);
            let rk = achievable_rate(w * k, s).unwrap();
            prop_assert!((rk - k * r).abs() <= 1e-9 * rk.abs().max(1.0));
        }
    }
}
