use std::fs;
use std::path::{Path, PathBuf};

use sara_core::datasets::{build_pair_samples, load_ego_facebook, select_users, synth_ego_network, SurrogateSpec};
use sara_core::harness::{
    build_instance, emit_csv, emit_plot_data, prepare_social, run_all, runs_csv, summary_csv, sweep, Algorithm,
    AggregateReport, ScenarioConfig, ScenarioLabel, SocialSource, SweepPoint,
};
use sara_core::matching::{verify_s_stability, verify_two_sided_stability, StateSnapshot};
use sara_core::social::{hyper_from_text, infer_ties, params_to_text, TieHyper};
use sara_core::{Error, GameConfig, Result};

use crate::Command;

pub fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::InferTies { dataset, ego, users, out, hyper, params, seed } => {
            infer(&dataset, ego, users, &out, hyper.as_deref(), params.as_deref(), seed)
        }
        Command::Run { config, z, out, seed } => run(&config, z.as_deref(), &out, seed),
        Command::Sweep { config, param, values, out, seed } => sweep_cmd(&config, &param, &values, &out, seed),
        Command::Verify { trace } => verify(&trace),
        Command::Report { input, out, plot } => report(&input, &out, plot.as_deref()),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn from_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Error::Parse { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })
}

fn infer(
    dataset: &str,
    ego: u64,
    users: usize,
    out: &Path,
    hyper: Option<&Path>,
    params: Option<&Path>,
    seed: u64,
) -> Result<u8> {
    let net = if dataset == "surrogate" {
        synth_ego_network(&SurrogateSpec::default(), ego, seed)?
    } else {
        load_ego_facebook(Path::new(dataset), ego)?
    };
    let hyper = match hyper {
        Some(p) => hyper_from_text(&read(p)?, p)?,
        None => TieHyper::default(),
    };
    let chosen = select_users(&net, users)?;
    let data = build_pair_samples(&net, &chosen)?;
    let inf = infer_ties(&data, chosen.len(), &hyper, seed)?;
    let ids: Vec<u64> = chosen.iter().map(|&u| net.node_ids[u]).collect();
    inf.ties.write_csv(out, &ids)?;
    if let Some(p) = params {
        write(p, &params_to_text(&inf.params))?;
    }
    println!(
        "{} users, {} pairs, {} iterations, objective {:.6}",
        chosen.len(),
        data.len(),
        inf.iterations,
        inf.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    if !inf.converged {
        eprintln!("warning: learner stopped at max_iters before reaching tol_obj");
    }
    Ok(0)
}

fn load(config: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seeds.start = s;
    }
    Ok(cfg)
}

fn create(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn run(config: &Path, z: Option<&str>, out: &Path, seed: Option<u64>) -> Result<u8> {
    let mut cfg = load(config, seed)?;
    match z {
        None => {}
        Some("synthetic") => cfg.social.source = SocialSource::Surrogate,
        Some(p) => {
            cfg.social.source = SocialSource::Csv;
            cfg.social.path = Some(PathBuf::from(p));
        }
    }
    cfg.validate()?;
    create(out)?;
    let social = prepare_social(&cfg)?;
    social.ties.write_csv(&out.join("z.csv"), &social.ids)?;

    // The saved scenario reads its ties back from the copy in `out`.
    let mut saved = cfg.clone();
    saved.social.source = SocialSource::Csv;
    saved.social.path = Some(PathBuf::from("z.csv"));
    saved.social.dir = None;
    write(&out.join("scenario.toml"), &saved.to_toml())?;

    let outputs = run_all(&cfg, &social)?;
    for (inst, o) in &outputs {
        write(&out.join(format!("state_{}.json", inst.seed)), &json(&StateSnapshot::capture(&inst.game, &o.state)))?;
        write(&out.join(format!("trace_{}.jsonl", inst.seed)), &o.trace.to_jsonl())?;
    }
    let report = AggregateReport::from_runs(ScenarioLabel::of(&cfg), outputs.into_iter().map(|(_, o)| o.metrics).collect());
    write(&out.join("runs.csv"), &runs_csv(&report))?;
    write(&out.join("summary.csv"), &summary_csv(std::slice::from_ref(&report)))?;
    write(&out.join("report.json"), &json(&report))?;
    print_report(&report);
    Ok(report.exit_code() as u8)
}

fn print_report(r: &AggregateReport) {
    let s = &r.scenario;
    println!(
        "{} L={} M_u={} M_s={} N=({},{},{}) rho={}: {} runs, {} converged, {} stable",
        s.algorithm,
        s.scbs,
        s.ues,
        s.sues,
        s.n1,
        s.n2,
        s.n3,
        s.rho,
        r.runs.len(),
        r.converged_runs(),
        r.stable_runs()
    );
    for m in &r.metrics {
        println!("  {:<18} {:>14.6} ± {:.6}", m.name, m.mean, m.ci95);
    }
}

fn worst_exit(codes: impl IntoIterator<Item = i32>) -> u8 {
    let codes: Vec<i32> = codes.into_iter().collect();
    if codes.contains(&3) {
        3
    } else if codes.contains(&2) {
        2
    } else {
        0
    }
}

fn sweep_cmd(config: &Path, param: &str, values: &[String], out: &Path, seed: Option<u64>) -> Result<u8> {
    let cfg = load(config, seed)?;
    let points = sweep(&cfg, param, values)?;
    create(out)?;
    let reports: Vec<AggregateReport> = points.iter().map(|p| p.report.clone()).collect();
    emit_csv(&reports, &out.join("summary.csv"))?;
    emit_plot_data(&points, &out.join("plot_data.csv"))?;
    write(&out.join("sweep.json"), &json(&points))?;
    for p in &points {
        println!("{} = {}", p.param, p.value);
        print_report(&p.report);
    }
    Ok(worst_exit(reports.iter().map(AggregateReport::exit_code)))
}

/// `state_<seed>.json` files of a run directory, in seed order.
fn state_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(seed) = name.strip_prefix("state_").and_then(|n| n.strip_suffix(".json")) {
            let seed = seed
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{}: seed `{seed}` is not an integer", path.display())))?;
            out.push((seed, path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no state_<seed>.json files", dir.display())));
    }
    Ok(out)
}

fn verify(dir: &Path) -> Result<u8> {
    let cfg = ScenarioConfig::load(&dir.join("scenario.toml"))?;
    let social = prepare_social(&cfg)?;
    let mut failures = 0;
    let files = state_files(dir)?;
    for (seed, path) in &files {
        let inst = build_instance(&cfg, &social, *seed)?;
        // The unaware baseline is stable in the rate-only game it plays.
        let game = match cfg.algorithm {
            Algorithm::ContextUnaware => inst.game.clone().with_config(GameConfig::context_unaware())?,
            _ => inst.game,
        };
        let snapshot: StateSnapshot = from_json(path)?;
        let state = snapshot.restore(&game)?;
        let report = verify_two_sided_stability(&game, &state);
        let s_stable = verify_s_stability(&game, &state);
        println!(
            "seed {seed}: {} blocking pairs (ue_d2d {}, sue {}, ue_cellular {}, unmatched {}); {}/{} clusters S-stable",
            report.total(),
            report.ue_d2d,
            report.sue,
            report.ue_cellular,
            report.unmatched,
            s_stable.values().filter(|&&ok| ok).count(),
            s_stable.len()
        );
        failures += usize::from(!report.is_stable());
    }
    println!("{} of {} matchings stable", files.len() - failures, files.len());
    Ok(if failures > 0 { 3 } else { 0 })
}

fn collect(dir: &Path, reports: &mut Vec<AggregateReport>, points: &mut Vec<SweepPoint>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| io_err(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect(&path, reports, points)?;
        } else if path.file_name().is_some_and(|n| n == "report.json") {
            reports.push(from_json(&path)?);
        } else if path.file_name().is_some_and(|n| n == "sweep.json") {
            let found: Vec<SweepPoint> = from_json(&path)?;
            reports.extend(found.iter().map(|p| p.report.clone()));
            points.extend(found);
        }
    }
    Ok(())
}

fn report(input: &Path, out: &Path, plot: Option<&Path>) -> Result<u8> {
    let (mut reports, mut points) = (Vec::new(), Vec::new());
    collect(input, &mut reports, &mut points)?;
    if reports.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no report.json or sweep.json found", input.display())));
    }
    emit_csv(&reports, out)?;
    if let Some(p) = plot {
        emit_plot_data(&points, p)?;
    }
    println!("{} reports, {} sweep points", reports.len(), points.len());
    Ok(0)
}
