use serde::{Deserialize, Serialize};

use super::{MatchState, Matching};
use crate::error::{Error, Result};
use crate::phy::{achievable_rate, sinr, Band, ChannelRealization, Interference, RbCatalog, SpectrumPlan, Topology};
use crate::social::SocialTieMatrix;

/// Which cluster peers count towards a UE's D2D utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerMemory {
    /// Members of the cluster in both of the last two matchings.
    TwoMatchings,
    /// As above, but a peer that has ever left the cluster is ignored from
    /// then on. Rules out peer-driven cycles.
    #[default]
    IgnoreDeparted,
}

/// Social weights in bit/s per unit tie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    /// UE weight on its ties inside a D2D cluster.
    pub alpha: f64,
    /// `N1` block penalty on a UE's ties to SUEs.
    pub beta: f64,
    /// `N2` block bonus on an SUE's cluster ties.
    pub nu: f64,
    /// `N3` block bonus on the UE's tie to the block's owner.
    pub kappa: f64,
    /// Round cap for the iterative algorithm; `None` means `10 (M + N_T)`.
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub peer_memory: PeerMemory,
}

impl GameConfig {
    /// Every weight set to half the block bandwidth.
    pub fn half_bandwidth(plan: &SpectrumPlan) -> Self {
        let w = plan.rb_bandwidth_hz / 2.0;
        Self { alpha: w, beta: w, nu: w, kappa: w, max_rounds: None, peer_memory: PeerMemory::default() }
    }

    pub fn context_unaware() -> Self {
        Self { alpha: 0.0, beta: 0.0, nu: 0.0, kappa: 0.0, max_rounds: None, peer_memory: PeerMemory::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("nu", self.nu), ("kappa", self.kappa)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("weight `{name}` = {v} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Ue,
    Sue,
}

/// Everything fixed during a run: the block catalog, user roles, link rates
/// and social ties. Utilities additionally depend on a [`MatchState`].
#[derive(Debug, Clone)]
pub struct Game {
    catalog: RbCatalog,
    roles: Vec<Role>,
    ues: Vec<usize>,
    sues: Vec<usize>,
    /// `rates[rb * n_users + user]`, bit/s.
    rates: Vec<f64>,
    ties: SocialTieMatrix,
    cfg: GameConfig,
}

impl Game {
    /// Rates under worst-case (always-on) co-channel interference.
    pub fn build(
        topology: &Topology,
        plan: &SpectrumPlan,
        channels: &ChannelRealization,
        ties: SocialTieMatrix,
        cfg: GameConfig,
    ) -> Result<Self> {
        let catalog = RbCatalog::new(plan, topology.n_scbs(), topology.sues());
        let n = topology.n_users();
        let mut rates = Vec::with_capacity(catalog.len() * n);
        for rb in catalog.blocks() {
            for m in 0..n {
                rates.push(achievable_rate(plan.rb_bandwidth_hz, sinr(channels, rb, m, Interference::WorstCase))?);
            }
        }
        Self::from_rates(catalog, topology.sues(), n, rates, ties, cfg)
    }

    /// `rates` is block-major: `rates[rb * n_users + user]`.
    pub fn from_rates(
        catalog: RbCatalog,
        sues: &[usize],
        n_users: usize,
        rates: Vec<f64>,
        ties: SocialTieMatrix,
        cfg: GameConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if rates.len() != catalog.len() * n_users {
            return Err(Error::DimensionMismatch { expected: catalog.len() * n_users, found: rates.len() });
        }
        if ties.len() != n_users {
            return Err(Error::DimensionMismatch { expected: n_users, found: ties.len() });
        }
        if let Some(r) = rates.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(format!("rate {r} is not finite")));
        }
        let mut roles = vec![Role::Ue; n_users];
        for &s in sues {
            *roles
                .get_mut(s)
                .ok_or_else(|| Error::InvalidInput(format!("SUE id {s} out of range")))? = Role::Sue;
        }
        for rb in catalog.blocks() {
            if rb.band == Band::N3 && roles.get(rb.owner) != Some(&Role::Sue) {
                return Err(Error::InvalidInput(format!("D2D block {rb:?} is owned by a non-SUE")));
            }
        }
        let ues = (0..n_users).filter(|&u| roles[u] == Role::Ue).collect();
        let sues = (0..n_users).filter(|&u| roles[u] == Role::Sue).collect();
        Ok(Self { catalog, roles, ues, sues, rates, ties, cfg })
    }

    pub fn with_config(mut self, cfg: GameConfig) -> Result<Self> {
        cfg.validate()?;
        self.cfg = cfg;
        Ok(self)
    }

    pub fn with_ties(mut self, ties: SocialTieMatrix) -> Result<Self> {
        if ties.len() != self.n_users() {
            return Err(Error::DimensionMismatch { expected: self.n_users(), found: ties.len() });
        }
        self.ties = ties;
        Ok(self)
    }

    pub fn catalog(&self) -> &RbCatalog {
        &self.catalog
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn ties(&self) -> &SocialTieMatrix {
        &self.ties
    }

    pub fn n_users(&self) -> usize {
        self.roles.len()
    }

    pub fn role(&self, user: usize) -> Role {
        self.roles[user]
    }

    pub fn ues(&self) -> &[usize] {
        &self.ues
    }

    pub fn sues(&self) -> &[usize] {
        &self.sues
    }

    /// `N_T`: blocks open to plain UEs.
    pub fn n_offered_to_ues(&self) -> usize {
        self.catalog.blocks().iter().filter(|b| b.band != Band::N2).count()
    }

    pub fn rate(&self, rb: usize, user: usize) -> f64 {
        self.rates[rb * self.n_users() + user]
    }

    /// `N2` serves SUEs only; `N1` and `N3` serve plain UEs only.
    pub fn compatible(&self, rb: usize, user: usize) -> bool {
        matches!(
            (self.catalog.get(rb).band, self.roles[user]),
            (Band::N2, Role::Sue) | (Band::N1 | Band::N3, Role::Ue)
        )
    }

    /// Per user, the SUE owning its `N3` block under `m`.
    pub fn cluster_membership(&self, m: &Matching) -> Vec<Option<usize>> {
        (0..self.n_users())
            .map(|u| {
                m.rb_of(u).and_then(|rb| {
                    let b = self.catalog.get(rb);
                    (b.band == Band::N3).then_some(b.owner)
                })
            })
            .collect()
    }

    fn expect_band(&self, rb: usize, band: Band, expected: &'static str) -> Result<()> {
        let found = self.catalog.get(rb).band;
        if found != band {
            return Err(Error::WrongBand { expected, found });
        }
        Ok(())
    }

    fn expect_role(&self, user: usize, role: Role) -> Result<()> {
        if self.roles.get(user) != Some(&role) {
            return Err(Error::InvalidInput(format!("user {user} is not a {role:?}")));
        }
        Ok(())
    }

    pub fn utility_ue_cellular(&self, ue: usize, rb: usize) -> Result<f64> {
        self.expect_band(rb, Band::N1, "N1")?;
        self.expect_role(ue, Role::Ue)?;
        Ok(self.rate(rb, ue))
    }

    pub fn utility_sue(&self, sue: usize, rb: usize) -> Result<f64> {
        self.expect_band(rb, Band::N2, "N2")?;
        self.expect_role(sue, Role::Sue)?;
        Ok(self.rate(rb, sue))
    }

    /// Rate plus `alpha` times the UE's tie to the owner and to every other
    /// UE that has stayed in the owner's cluster across the last two matchings.
    pub fn utility_ue_d2d(&self, state: &MatchState, ue: usize, rb: usize) -> Result<f64> {
        self.expect_band(rb, Band::N3, "N3")?;
        self.expect_role(ue, Role::Ue)?;
        Ok(self.d2d_player(state, ue, rb))
    }

    /// Rate minus `beta` times the UE's total tie to SUEs.
    pub fn utility_rb_n1(&self, rb: usize, ue: usize) -> Result<f64> {
        self.expect_band(rb, Band::N1, "N1")?;
        self.expect_role(ue, Role::Ue)?;
        Ok(self.n1_block(rb, ue))
    }

    /// Rate plus `nu` times the SUE's tie mass to its current cluster.
    pub fn utility_rb_n2(&self, state: &MatchState, rb: usize, sue: usize) -> Result<f64> {
        self.expect_band(rb, Band::N2, "N2")?;
        self.expect_role(sue, Role::Sue)?;
        Ok(self.n2_block(state, rb, sue))
    }

    /// Rate plus `kappa` times the UE's tie to the block's owner.
    pub fn utility_rb_n3(&self, rb: usize, ue: usize) -> Result<f64> {
        self.expect_band(rb, Band::N3, "N3")?;
        self.expect_role(ue, Role::Ue)?;
        Ok(self.n3_block(rb, ue))
    }

    fn d2d_player(&self, state: &MatchState, ue: usize, rb: usize) -> f64 {
        let s = self.catalog.get(rb).owner;
        let peers: f64 = self
            .ues
            .iter()
            .filter(|&&j| j != ue && state.persistent_in(j) == Some(s))
            .map(|&j| self.ties.get(ue, j))
            .sum();
        self.rate(rb, ue) + self.cfg.alpha * (self.ties.get(ue, s) + peers)
    }

    fn n1_block(&self, rb: usize, ue: usize) -> f64 {
        let to_sues: f64 = self.sues.iter().map(|&j| self.ties.get(ue, j)).sum();
        self.rate(rb, ue) - self.cfg.beta * to_sues
    }

    fn n2_block(&self, state: &MatchState, rb: usize, sue: usize) -> f64 {
        let x: f64 =
            self.ues.iter().filter(|&&u| state.cluster_of(u) == Some(sue)).map(|&u| self.ties.get(u, sue)).sum();
        self.rate(rb, sue) + self.cfg.nu * x
    }

    fn n3_block(&self, rb: usize, ue: usize) -> f64 {
        let s = self.catalog.get(rb).owner;
        self.rate(rb, ue) + self.cfg.kappa * self.ties.get(ue, s)
    }

    /// The user's utility for a compatible block under `state`.
    pub(crate) fn player_utility(&self, state: &MatchState, user: usize, rb: usize) -> f64 {
        debug_assert!(self.compatible(rb, user));
        match self.catalog.get(rb).band {
            Band::N1 | Band::N2 => self.rate(rb, user),
            Band::N3 => self.d2d_player(state, user, rb),
        }
    }

    /// The block's utility for a compatible user under `state`.
    pub(crate) fn rb_utility(&self, state: &MatchState, rb: usize, user: usize) -> f64 {
        debug_assert!(self.compatible(rb, user));
        match self.catalog.get(rb).band {
            Band::N1 => self.n1_block(rb, user),
            Band::N2 => self.n2_block(state, rb, user),
            Band::N3 => self.n3_block(rb, user),
        }
    }

    /// Strict player preference with block-order tie-break. `None` is
    /// unmatched, which every block beats.
    pub(crate) fn player_prefers(&self, state: &MatchState, user: usize, a: usize, b: Option<usize>) -> bool {
        match b {
            None => true,
            Some(b) => {
                let (ua, ub) = (self.player_utility(state, user, a), self.player_utility(state, user, b));
                ua > ub || (ua == ub && a < b)
            }
        }
    }

    /// Strict block preference with lower-id tie-break. `None` is vacancy.
    pub(crate) fn rb_prefers(&self, state: &MatchState, rb: usize, x: usize, y: Option<usize>) -> bool {
        match y {
            None => true,
            Some(y) => {
                let (ux, uy) = (self.rb_utility(state, rb, x), self.rb_utility(state, rb, y));
                ux > uy || (ux == uy && x < y)
            }
        }
    }

    /// Sum of matched users' utilities, with cluster coefficients taken from
    /// `m` itself (as if it had been held for two matchings).
    pub fn social_welfare(&self, m: &Matching) -> f64 {
        let state = MatchState::settled(self, m.clone());
        m.pairs().map(|(rb, u)| self.player_utility(&state, u, rb)).sum()
    }

    pub fn sum_rate(&self, m: &Matching) -> f64 {
        m.pairs().map(|(rb, u)| self.rate(rb, u)).sum()
    }

    /// Every pair is band-compatible.
    pub fn is_valid(&self, m: &Matching) -> bool {
        m.n_rbs() == self.catalog.len()
            && m.n_users() == self.n_users()
            && m.is_consistent()
            && m.pairs().all(|(rb, u)| self.compatible(rb, u))
    }
}
