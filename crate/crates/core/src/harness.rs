//! Scenario configuration, Monte-Carlo runs and the reported metrics.
//!
//! A scenario is one TOML file. Every key can be overridden from the
//! environment with `SARA_<SECTION>__<KEY>=<value>`, for example
//! `SARA_NETWORK__UES=50` or `SARA_SOCIAL__DIR=/data/facebook`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{centralized_context_aware, centralized_context_unaware, context_unaware_matching};
use crate::datasets::{build_pair_samples, load_ego_facebook, select_users, synth_ego_network, EgoNetwork, SurrogateSpec};
use crate::error::{Error, Result};
use crate::matching::{
    default_max_rounds, run_sara, verify_two_sided_stability, Game, GameConfig, MatchState, PeerMemory, RunTrace,
};
use crate::phy::{
    achievable_rate, dbm_to_watts, sample_channels, sinr, ChannelRealization, Interference, InterferenceModel,
    RBlock, RadioParams, SpectrumPlan, Topology,
};
use crate::social::{infer_ties, select_sues, SocialTieMatrix, TieHyper};
use crate::stats::{ci95_half_width, mean};

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "SARA_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Sara,
    ContextUnaware,
    CentralAware,
    CentralUnaware,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Sara, Algorithm::ContextUnaware, Algorithm::CentralAware, Algorithm::CentralUnaware];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sara => "sara",
            Algorithm::ContextUnaware => "context_unaware",
            Algorithm::CentralAware => "central_aware",
            Algorithm::CentralUnaware => "central_unaware",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub scbs: usize,
    pub ues: usize,
    pub sues: usize,
    pub area_side_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { scbs: 7, ues: 30, sues: 4, area_side_m: 2000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub rb_bandwidth_hz: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { n1: 5, n2: 3, n3: 5, rb_bandwidth_hz: SpectrumPlan::LTE_RB_HZ }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub scbs_power_w: f64,
    pub sue_power_w: f64,
    pub pathloss_exponent: f64,
    pub noise_dbm: f64,
    pub min_distance_m: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self { scbs_power_w: 2.0, sue_power_w: 0.01, pathloss_exponent: 3.0, noise_dbm: -90.0, min_distance_m: Some(1.0) }
    }
}

/// Social weights; unset weights default to half the block bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    pub peer_memory: PeerMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocialSource {
    /// Ties inferred from a generated SNAP-format ego network.
    #[default]
    Surrogate,
    /// Ties inferred from a SNAP ego-Facebook directory.
    Ego,
    /// A tie matrix read from CSV.
    Csv,
    /// No ties at all.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialConfig {
    pub source: SocialSource,
    /// Users whose ties are inferred; scenarios draw their users from this pool.
    pub pool: usize,
    pub ego: u64,
    /// Seed of the surrogate network and of the learner's initial point.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub surrogate: SurrogateSpec,
    pub hyper: TieHyper,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            source: SocialSource::Surrogate,
            pool: 80,
            ego: 0,
            seed: 0,
            dir: None,
            path: None,
            surrogate: SurrogateSpec::default(),
            hyper: TieHyper::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedsConfig {
    pub start: u64,
    pub count: usize,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        Self { start: 0, count: 100 }
    }
}

impl SeedsConfig {
    pub fn list(&self) -> Vec<u64> {
        (0..self.count as u64).map(|k| self.start + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub algorithm: Algorithm,
    /// Offload steepness applied to the cluster average tie.
    pub rho: f64,
    /// Interference used when reporting sum rate. Preferences always use
    /// the worst case.
    pub metrics_interference: InterferenceModel,
    pub network: NetworkConfig,
    pub spectrum: SpectrumConfig,
    pub radio: RadioConfig,
    pub weights: WeightsConfig,
    pub social: SocialConfig,
    pub seeds: SeedsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sara,
            rho: 0.1,
            metrics_interference: InterferenceModel::WorstCase,
            network: NetworkConfig::default(),
            spectrum: SpectrumConfig::default(),
            radio: RadioConfig::default(),
            weights: WeightsConfig::default(),
            social: SocialConfig::default(),
            seeds: SeedsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates; `origin` names the source in error messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        Self::from_table(table, origin)
    }

    /// Reads `path`, applies `SARA_` overrides from the process
    /// environment, and resolves relative dataset paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        apply_env_overrides(&mut table, vars)?;
        let mut cfg = Self::from_table(table, &origin)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.social.dir, &mut cfg.social.path].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn from_table(table: toml::Table, origin: &str) -> Result<Self> {
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    /// Copy with one dotted key (e.g. `network.ues`) set from a TOML
    /// literal; bare words are taken as strings.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let path: Vec<String> = key.split('.').map(str::to_owned).collect();
        set_path(&mut table, &path, parse_literal(value))?;
        Self::from_table(table, &format!("override `{key}`"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, why: &str| Err(Error::Config(format!("`{k}` {why}")));
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad("rho", "must be finite and nonnegative");
        }
        if !(self.network.area_side_m.is_finite() && self.network.area_side_m > 0.0) {
            return bad("network.area_side_m", "must be positive");
        }
        if self.spectrum.rb_bandwidth_hz <= 0.0 || !self.spectrum.rb_bandwidth_hz.is_finite() {
            return bad("spectrum.rb_bandwidth_hz", "must be positive");
        }
        if self.seeds.count == 0 {
            return bad("seeds.count", "must be at least 1");
        }
        if self.social.source != SocialSource::Csv && self.network.ues + self.network.sues > self.social.pool {
            return bad("social.pool", "must hold at least network.ues + network.sues users");
        }
        match self.social.source {
            SocialSource::Ego if self.social.dir.is_none() => return bad("social.dir", "is required for source = \"ego\""),
            SocialSource::Csv if self.social.path.is_none() => {
                return bad("social.path", "is required for source = \"csv\"")
            }
            _ => {}
        }
        self.radio_params().validate().map_err(|e| Error::Config(format!("radio: {e}")))?;
        self.game_config().validate()
    }

    pub fn plan(&self) -> Result<SpectrumPlan> {
        let s = &self.spectrum;
        SpectrumPlan::new(s.n1, s.n2, s.n3, s.rb_bandwidth_hz)
    }

    pub fn radio_params(&self) -> RadioParams {
        let r = &self.radio;
        RadioParams {
            scbs_power_w: r.scbs_power_w,
            sue_power_w: r.sue_power_w,
            pathloss_exponent: r.pathloss_exponent,
            noise_w: dbm_to_watts(r.noise_dbm),
            min_distance_m: r.min_distance_m,
        }
    }

    pub fn game_config(&self) -> GameConfig {
        let half = self.spectrum.rb_bandwidth_hz / 2.0;
        let w = &self.weights;
        GameConfig {
            alpha: w.alpha.unwrap_or(half),
            beta: w.beta.unwrap_or(half),
            nu: w.nu.unwrap_or(half),
            kappa: w.kappa.unwrap_or(half),
            max_rounds: w.max_rounds,
            peer_memory: w.peer_memory,
        }
    }
}

/// Applies every `SARA_A__B=v` variable as `a.b = v`. Unknown keys are
/// caught later by schema validation.
pub fn apply_env_overrides(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (k, v) in vars {
        let path: Vec<String> = k[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        set_path(table, &path, parse_literal(&v)).map_err(|e| Error::Config(format!("{k}: {e}")))?;
    }
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::Config("empty key".into()))?;
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Offload probability of a UE whose cluster has average tie `zbar`.
pub fn offload_probability(zbar: f64, rho: f64) -> f64 {
    1.0 / (1.0 + (-rho * zbar).exp())
}

/// Per SUE: its clustered UEs and their mean tie to it. Clusters without
/// UEs are listed with an average of 0.
pub fn cluster_ties(game: &Game, state: &MatchState) -> BTreeMap<usize, (usize, f64)> {
    state
        .clusters(game.sues())
        .into_iter()
        .map(|(s, members)| {
            let zbar = if members.is_empty() {
                0.0
            } else {
                members.iter().map(|&u| game.ties().get(u, s)).sum::<f64>() / members.len() as f64
            };
            (s, (members.len(), zbar))
        })
        .collect()
}

/// Expected number of clustered UEs served from their cluster's cache.
pub fn expected_offload(game: &Game, state: &MatchState, rho: f64) -> f64 {
    cluster_ties(game, state).values().map(|&(n, zbar)| n as f64 * offload_probability(zbar, rho)).sum()
}

/// Mean cluster tie over clusters that hold at least one UE; 0 if none do.
pub fn cluster_avg_tie(game: &Game, state: &MatchState) -> f64 {
    let zs: Vec<f64> = cluster_ties(game, state).values().filter(|(n, _)| *n > 0).map(|&(_, z)| z).collect();
    if zs.is_empty() {
        0.0
    } else {
        mean(&zs)
    }
}

/// Inferred ties for the user pool of a scenario.
#[derive(Debug, Clone)]
pub struct SocialContext {
    /// Dataset node id of each pool member.
    pub ids: Vec<u64>,
    pub ties: SocialTieMatrix,
    /// Pool indices of the SUEs.
    pub sues: Vec<usize>,
    pub learner_iterations: usize,
    pub learner_converged: bool,
}

pub fn prepare_social(cfg: &ScenarioConfig) -> Result<SocialContext> {
    let s = &cfg.social;
    let (ids, ties, iterations, converged) = match s.source {
        SocialSource::Surrogate => {
            let net = synth_ego_network(&s.surrogate, s.ego, s.seed)?;
            infer_pool(&net, s)?
        }
        SocialSource::Ego => {
            let dir = s.dir.as_deref().expect("validated");
            infer_pool(&load_ego_facebook(dir, s.ego)?, s)?
        }
        SocialSource::Csv => {
            let (ids, ties) = SocialTieMatrix::read_csv(s.path.as_deref().expect("validated"))?;
            (ids, ties, 0, true)
        }
        SocialSource::Zero => ((0..s.pool as u64).collect(), SocialTieMatrix::zeros(s.pool), 0, true),
    };
    let needed = cfg.network.ues + cfg.network.sues;
    if ties.len() < needed {
        return Err(Error::Config(format!("tie matrix has {} users but the scenario needs {needed}", ties.len())));
    }
    let sues = select_sues(&ties, cfg.network.sues)?;
    Ok(SocialContext { ids, ties, sues, learner_iterations: iterations, learner_converged: converged })
}

fn infer_pool(net: &EgoNetwork, s: &SocialConfig) -> Result<(Vec<u64>, SocialTieMatrix, usize, bool)> {
    let users = select_users(net, s.pool)?;
    let data = build_pair_samples(net, &users)?;
    let inf = infer_ties(&data, users.len(), &s.hyper, s.seed)?;
    let ids = users.iter().map(|&u| net.node_ids[u]).collect();
    Ok((ids, inf.ties, inf.iterations, inf.converged))
}

/// One random deployment: users, positions, fading and the resulting game.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    /// Pool index of each game user.
    pub members: Vec<usize>,
    pub topology: Topology,
    pub channels: ChannelRealization,
    pub game: Game,
}

/// The SUEs are fixed by the pool; the UEs are a seeded random subset of
/// the remaining pool members.
pub fn build_instance(cfg: &ScenarioConfig, social: &SocialContext, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<usize> = (0..social.ties.len()).filter(|u| social.sues.binary_search(u).is_err()).collect();
    if cfg.network.ues > others.len() {
        return Err(Error::Config(format!("pool has only {} candidate UEs", others.len())));
    }
    let mut members: Vec<usize> = rand::seq::index::sample(&mut rng, others.len(), cfg.network.ues)
        .into_iter()
        .map(|k| others[k])
        .chain(social.sues.iter().copied())
        .collect();
    members.sort_unstable();
    let sues: Vec<usize> =
        members.iter().enumerate().filter(|(_, u)| social.sues.binary_search(u).is_ok()).map(|(i, _)| i).collect();
    let ties = social.ties.submatrix(&members);
    let plan = cfg.plan()?;
    let radio = cfg.radio_params();
    let topology = Topology::random(cfg.network.area_side_m, cfg.network.scbs, members.len(), sues, &mut rng)?;
    let channels = sample_channels(&topology, &plan, radio, rng.random())?;
    let game = Game::build(&topology, &plan, &channels, ties, cfg.game_config())?;
    Ok(Instance { seed, members, topology, channels, game })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub avg_cluster_tie: f64,
    /// bit/s over matched pairs.
    pub sum_rate: f64,
    /// Mean UE utility under the social utilities; unmatched UEs count 0.
    pub avg_utility: f64,
    pub expected_offload: f64,
    pub rounds: usize,
    pub proposals: usize,
    pub matched: usize,
    pub converged: bool,
    /// No blocking pair. Only checked for the decentralized algorithms;
    /// the centralized ones report `true`.
    pub stability_ok: bool,
}

impl RunMetrics {
    pub const METRICS: [&'static str; 7] =
        ["avg_cluster_tie", "sum_rate", "avg_utility", "expected_offload", "rounds", "proposals", "matched"];

    fn values(&self) -> [f64; 7] {
        [
            self.avg_cluster_tie,
            self.sum_rate,
            self.avg_utility,
            self.expected_offload,
            self.rounds as f64,
            self.proposals as f64,
            self.matched as f64,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: MatchState,
    pub trace: RunTrace,
    pub metrics: RunMetrics,
}

pub fn evaluate(cfg: &ScenarioConfig, inst: &Instance, algorithm: Algorithm) -> Result<RunOutput> {
    let game = &inst.game;
    let (state, trace, rounds, converged, stability_ok) = match algorithm {
        Algorithm::Sara => {
            let out = run_sara(game);
            let ok = verify_two_sided_stability(game, &out.state).is_stable();
            let rounds = out.rounds();
            (out.state, out.trace, rounds, out.converged, ok)
        }
        Algorithm::ContextUnaware => {
            let out = context_unaware_matching(game);
            let plain = game.clone().with_config(GameConfig::context_unaware())?;
            let ok = verify_two_sided_stability(&plain, &MatchState::settled(&plain, out.state.current.clone())).is_stable();
            (out.state, out.trace, 1, true, ok)
        }
        Algorithm::CentralUnaware => (centralized_context_unaware(game), RunTrace::default(), 1, true, true),
        Algorithm::CentralAware => {
            let out = centralized_context_aware(game, default_max_rounds(game));
            (out.state, RunTrace::default(), out.iterations, out.converged, true)
        }
    };
    let metrics = RunMetrics {
        seed: inst.seed,
        avg_cluster_tie: cluster_avg_tie(game, &state),
        sum_rate: sum_rate(inst, &state, cfg.metrics_interference)?,
        avg_utility: avg_utility(game, &state),
        expected_offload: expected_offload(game, &state, cfg.rho),
        rounds,
        proposals: trace.total_proposals(),
        matched: state.current.len(),
        converged,
        stability_ok,
    };
    Ok(RunOutput { state, trace, metrics })
}

pub fn sum_rate(inst: &Instance, state: &MatchState, model: InterferenceModel) -> Result<f64> {
    match model {
        InterferenceModel::WorstCase => Ok(inst.game.sum_rate(&state.current)),
        InterferenceModel::AssignedOnly => {
            let catalog = inst.game.catalog();
            let active: HashSet<RBlock> = state.current.pairs().map(|(rb, _)| catalog.get(rb)).collect();
            let bw = inst.channels.plan.rb_bandwidth_hz;
            state
                .current
                .pairs()
                .map(|(rb, u)| achievable_rate(bw, sinr(&inst.channels, &catalog.get(rb), u, Interference::ActiveOnly(&active))))
                .sum()
        }
    }
}

fn avg_utility(game: &Game, state: &MatchState) -> f64 {
    if game.ues().is_empty() {
        return 0.0;
    }
    let settled = MatchState::settled(game, state.current.clone());
    let total: f64 = game
        .ues()
        .iter()
        .filter_map(|&u| state.current.rb_of(u).map(|rb| game.player_utility(&settled, u, rb)))
        .sum();
    total / game.ues().len() as f64
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<RunMetrics> {
    let social = prepare_social(cfg)?;
    run_scenario_with(cfg, &social, seed)
}

pub fn run_scenario_with(cfg: &ScenarioConfig, social: &SocialContext, seed: u64) -> Result<RunMetrics> {
    let inst = build_instance(cfg, social, seed)?;
    Ok(evaluate(cfg, &inst, cfg.algorithm)?.metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub ci95: f64,
}

/// Scenario parameters that label a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLabel {
    pub algorithm: Algorithm,
    pub scbs: usize,
    pub ues: usize,
    pub sues: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub rho: f64,
}

impl ScenarioLabel {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Self {
            algorithm: cfg.algorithm,
            scbs: cfg.network.scbs,
            ues: cfg.network.ues,
            sues: cfg.network.sues,
            n1: cfg.spectrum.n1,
            n2: cfg.spectrum.n2,
            n3: cfg.spectrum.n3,
            rho: cfg.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario: ScenarioLabel,
    pub runs: Vec<RunMetrics>,
    pub metrics: Vec<MetricSummary>,
}

impl AggregateReport {
    pub fn from_runs(scenario: ScenarioLabel, runs: Vec<RunMetrics>) -> Self {
        let metrics = RunMetrics::METRICS
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let xs: Vec<f64> = runs.iter().map(|r| r.values()[k]).collect();
                MetricSummary { name: (*name).to_owned(), mean: mean(&xs), ci95: ci95_half_width(&xs) }
            })
            .collect();
        Self { scenario, runs, metrics }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn converged_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.converged).count()
    }

    pub fn stable_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.stability_ok).count()
    }

    /// 0 when clean, 3 if any run failed stability, else 2 if any run hit
    /// its round cap.
    pub fn exit_code(&self) -> i32 {
        if self.stable_runs() < self.runs.len() {
            3
        } else if self.converged_runs() < self.runs.len() {
            2
        } else {
            0
        }
    }
}

pub fn monte_carlo(cfg: &ScenarioConfig) -> Result<AggregateReport> {
    let social = prepare_social(cfg)?;
    monte_carlo_with(cfg, &social)
}

/// Seeds run in parallel; results are kept in seed order.
pub fn monte_carlo_with(cfg: &ScenarioConfig, social: &SocialContext) -> Result<AggregateReport> {
    let runs = cfg
        .seeds
        .list()
        .par_iter()
        .map(|&seed| run_scenario_with(cfg, social, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateReport::from_runs(ScenarioLabel::of(cfg), runs))
}

/// Like [`monte_carlo_with`] but keeps every instance and final state.
pub fn run_all(cfg: &ScenarioConfig, social: &SocialContext) -> Result<Vec<(Instance, RunOutput)>> {
    cfg.seeds
        .list()
        .par_iter()
        .map(|&seed| {
            let inst = build_instance(cfg, social, seed)?;
            let out = evaluate(cfg, &inst, cfg.algorithm)?;
            Ok((inst, out))
        })
        .collect()
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: String,
    pub value: String,
    pub report: AggregateReport,
}

/// Runs the scenario once per value of the dotted key `param`. The social
/// context is inferred once and reused while the social section is unchanged.
pub fn sweep(cfg: &ScenarioConfig, param: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    let mut cached: Option<(SocialConfig, SocialContext)> = None;
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let c = cfg.with_override(param, v)?;
        let social = match &cached {
            Some((sc, ctx)) if *sc == c.social => ctx.clone(),
            _ => {
                let ctx = prepare_social(&c)?;
                cached = Some((c.social.clone(), ctx.clone()));
                ctx
            }
        };
        let social = SocialContext { sues: select_sues(&social.ties, c.network.sues)?, ..social };
        out.push(SweepPoint { param: param.to_owned(), value: v.clone(), report: monte_carlo_with(&c, &social)? });
    }
    Ok(out)
}

fn label_cells(s: &ScenarioLabel) -> String {
    format!("{},{},{},{},{},{},{},{}", s.algorithm, s.scbs, s.ues, s.sues, s.n1, s.n2, s.n3, s.rho)
}

const LABEL_HEADER: &str = "algorithm,scbs,ues,sues,n1,n2,n3,rho";

/// One row per report: scenario parameters, run counts, metric means, then
/// 95% half-widths.
pub fn summary_csv(reports: &[AggregateReport]) -> String {
    let mut out = format!("{LABEL_HEADER},runs,converged,stable");
    for prefix in ["mean", "ci95"] {
        for m in RunMetrics::METRICS {
            out.push_str(&format!(",{prefix}_{m}"));
        }
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{},{},{},{}", label_cells(&r.scenario), r.runs.len(), r.converged_runs(), r.stable_runs()));
        for m in &r.metrics {
            out.push_str(&format!(",{}", m.mean));
        }
        for m in &r.metrics {
            out.push_str(&format!(",{}", m.ci95));
        }
        out.push('\n');
    }
    out
}

/// One row per seed.
pub fn runs_csv(report: &AggregateReport) -> String {
    let mut out = format!("{LABEL_HEADER},seed,{},converged,stability_ok\n", RunMetrics::METRICS.join(","));
    for r in &report.runs {
        let vals: Vec<String> = r.values().iter().map(f64::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            label_cells(&report.scenario),
            r.seed,
            vals.join(","),
            r.converged,
            r.stability_ok
        ));
    }
    out
}

/// Long format: one row per (series, x, metric).
pub fn plot_data_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("series,param,x,metric,y,ci95\n");
    for p in points {
        for m in &p.report.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.report.scenario.algorithm, p.param, p.value, m.name, m.mean, m.ci95
            ));
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(reports: &[AggregateReport], path: &Path) -> Result<()> {
    write(path, &summary_csv(reports))
}

pub fn emit_plot_data(points: &[SweepPoint], path: &Path) -> Result<()> {
    write(path, &plot_data_csv(points))
}
