use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use risknet::baselines::{evaluate_all, first_above_percentile, first_detection, write_comparison_csv};
use risknet::predictor::{
    build_sample, extract_windows, load_model, metrics as window_metrics, save_model, synthetic_corpus, train as fit,
    Churn, Metrics, Model, Sample,
};
use risknet::prob_risk::{
    ego_at_step, model_predictions, probabilistic_raster, replay_predictions, risk_series, AgentPrediction,
    EgoMotion, VelocitySource,
};
use risknet::risk_field::{rasterize, total_directional_force, write_raster, GridSpec, RiskRaster, PROBE_ID};
use risknet::scenario::{
    build_graph, load_tracks, make_archetype, save_tracks, AgentId, AgentKind, AgentState, Archetype, LoadOptions,
    Scenario,
};
use risknet::Vec2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{parse_extended, split_pair, RunConfig};
use crate::{CliError, Common, Forecast, HyperFlags};

/// Frame rate recorded next to generated CSVs.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackMeta {
    frame_rate: f64,
    source: String,
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for pair in &common.schema {
        let (k, v) = split_pair(pair).map_err(usage)?;
        cfg.io.schema.insert(k, v);
    }
    if let Some(r) = common.frame_rate {
        cfg.io.frame_rate = Some(r);
    }
    if common.bbox_corner {
        cfg.io.bbox_corner = true;
    }
    Ok(cfg)
}

fn apply_hyper(cfg: &mut RunConfig, h: &HyperFlags) {
    let p = &mut cfg.predictor;
    if let Some(v) = h.epochs {
        p.epochs = v;
    }
    if let Some(v) = h.lr {
        p.lr = v;
    }
    if let Some(v) = h.modes {
        p.modes = v;
    }
    if let Some(v) = h.hidden {
        p.hidden = v;
    }
    if let Some(v) = h.history {
        p.history = v;
    }
    if let Some(v) = h.horizon {
        p.horizon = v;
    }
    if let Some(v) = h.dt {
        p.dt = v;
    }
    if let Some(v) = h.batch_size {
        p.batch_size = v;
    }
}

/// Validates the forecast flags and folds them into the fusion config.
/// Replay defaults to the recorded velocities.
fn apply_forecast(cfg: &mut RunConfig, f: &Forecast) -> Result<(), CliError> {
    if !f.probabilistic {
        if f.model.is_some() || f.replay || f.velocity.is_some() || f.weights.is_some() || f.unit_mass {
            return Err(usage("forecast options need --probabilistic"));
        }
        return Ok(());
    }
    if f.model.is_none() && !f.replay {
        return Err(usage("--probabilistic needs --model or --replay"));
    }
    match f.velocity {
        Some(v) => cfg.fusion.velocity = v.into(),
        None if f.replay => cfg.fusion.velocity = VelocitySource::ModeState,
        None => {}
    }
    if let Some(w) = f.weights {
        cfg.fusion.weights = w.into();
    }
    if f.unit_mass {
        cfg.fusion.unit_mass_energy = true;
    }
    Ok(())
}

fn read_meta(csv: &Path) -> Result<Option<f64>, CliError> {
    let path = meta_path(csv);
    if !path.exists() {
        return Ok(None);
    }
    let meta: TrackMeta = serde_json::from_str(&std::fs::read_to_string(&path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(Some(meta.frame_rate))
}

/// Loads a track CSV, or generates `archetype:<name>`.
pub fn load_scenario(spec: &str, cfg: &RunConfig) -> Result<Scenario<f64>, CliError> {
    if let Some(name) = spec.strip_prefix("archetype:") {
        let which: Archetype = name.parse()?;
        return Ok(make_archetype(
            which,
            &cfg.io.archetype_params,
            cfg.io.archetype_rate,
            cfg.io.archetype_duration.unwrap_or(which.default_duration()),
        )?);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(usage(format!("scenario file {} not found", path.display())));
    }
    let frame_rate = match cfg.io.frame_rate {
        Some(r) => r,
        None => read_meta(path)?.unwrap_or(25.0),
    };
    let opts = LoadOptions {
        schema: cfg.schema()?,
        masses: cfg.masses.clone(),
        frame_rate,
        bbox_corner: cfg.io.bbox_corner,
        default_kind: AgentKind::Car,
    };
    Ok(load_tracks(path, &opts)?)
}

fn provenance(command: &str, scenario: Option<&Scenario<f64>>, extra: Value, cfg: &RunConfig) -> Value {
    let mut v = json!({ "command": command });
    if let Some(s) = scenario {
        v["frame_rate"] = json!(s.frame_rate);
        v["offset"] = json!([s.offset.x, s.offset.y]);
    }
    if let Value::Object(m) = extra {
        for (k, x) in m {
            v[k] = x;
        }
    }
    v["config"] = cfg.echo();
    v
}

fn sidecar_for(out: &Path) -> Result<PathBuf, CliError> {
    if out.extension().is_some_and(|e| e == "json") {
        return Err(usage(format!("{} would collide with its sidecar; use another extension", out.display())));
    }
    Ok(out.with_extension("json"))
}

/// Creates the directory an output file goes into.
fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// Writes `bytes` to `out` (plus a provenance sidecar), or to standard
/// output when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8], sidecar: Value) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let side = sidecar_for(path)?;
            ensure_parent(path)?;
            std::fs::write(path, bytes)?;
            write_json(&side, &sidecar)
        }
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn opt_frame(f: Option<i64>) -> String {
    f.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

struct Forecasts {
    predictions: BTreeMap<AgentId, AgentPrediction<f64>>,
    motion: EgoMotion<f64>,
    horizon: usize,
    dt: f64,
}

fn forecasts(
    cfg: &RunConfig,
    scenario: &Scenario<f64>,
    ego: Option<AgentId>,
    t: i64,
    f: &Forecast,
) -> Result<Forecasts, CliError> {
    if let Some(path) = &f.model {
        let model = load_model::<f64>(path)?;
        let predictions = model_predictions(&model, scenario, t, ego)?;
        return Ok(Forecasts {
            predictions,
            motion: EgoMotion::ConstantVelocity,
            horizon: model.hyper.horizon,
            dt: model.hyper.dt,
        });
    }
    let step = cfg.predictor.frame_step(scenario.frame_rate)?;
    let (predictions, motion) = replay_predictions(scenario, ego, t, step, cfg.predictor.horizon)?;
    Ok(Forecasts {
        predictions,
        motion,
        horizon: cfg.predictor.horizon,
        dt: scenario.dt() * step as f64,
    })
}

pub fn eval(
    common: &Common,
    spec: &str,
    ego: AgentId,
    frame: Option<i64>,
    forecast: &Forecast,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    apply_forecast(&mut cfg, forecast)?;
    let cfg = cfg.finish()?;
    let scenario = load_scenario(spec, &cfg)?;
    let mut buf = Vec::new();
    if forecast.probabilistic {
        let t = frame.ok_or_else(|| usage("--probabilistic needs --frame"))?;
        let ego_now = scenario.state(ego, t).ok_or(risknet::Error::EgoAbsent(t))?;
        let fc = forecasts(&cfg, &scenario, Some(ego), t, forecast)?;
        let series = risk_series(ego_now, &fc.motion, &fc.predictions, fc.horizon, fc.dt, &cfg.risk, &cfg.fusion)?;
        series.write_csv(&mut buf)?;
        let extra = json!({
            "mode": if forecast.replay { "replay" } else { "model" },
            "ego_id": ego,
            "frame": t,
            "horizon": fc.horizon,
            "dt": fc.dt,
            "cumulative": series.cumulative,
            "weights": series.weights,
        });
        return emit(out, &buf, provenance("eval", Some(&scenario), extra, &cfg));
    }
    if frame.is_some() {
        return Err(usage("--frame applies to --probabilistic"));
    }
    let info = scenario
        .agent(ego)
        .ok_or(risknet::Error::EgoAbsent(scenario.first_frame().unwrap_or(0)))?;
    writeln!(buf, "frame,time_s,force_N")?;
    for f in info.first_frame..=info.last_frame {
        let states = scenario.frame(f).ok_or(risknet::Error::EgoAbsent(f))?;
        let ego_state = scenario.state(ego, f).ok_or(risknet::Error::EgoAbsent(f))?;
        let graph = build_graph(&scenario, ego, f, cfg.risk.radius)?;
        let force = total_directional_force(ego_state, &graph, states, &cfg.risk);
        writeln!(buf, "{f},{},{force}", scenario.time_of(f))?;
    }
    let extra = json!({ "mode": "deterministic", "ego_id": ego });
    emit(out, &buf, provenance("eval", Some(&scenario), extra, &cfg))
}

pub struct MapArgs {
    pub scenario: String,
    pub ego_id: Option<AgentId>,
    pub frame: i64,
    pub cell: f64,
    pub bounds: Option<Vec<f64>>,
    pub binary: bool,
    pub step: usize,
}

fn stationary_probe(frame: i64, cfg: &RunConfig) -> AgentState<f64> {
    AgentState::new(PROBE_ID, frame, Vec2::zero(), Vec2::zero()).with_kind(AgentKind::Car, cfg.masses.car, 4.5, 1.8)
}

/// Margin around the scenario extent when no bounds are given, meters.
const MAP_MARGIN: f64 = 10.0;

pub fn map(common: &Common, a: &MapArgs, forecast: &Forecast, out: &Path) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    apply_forecast(&mut cfg, forecast)?;
    if a.binary {
        cfg.io.binary = true;
    }
    let cfg = cfg.finish()?;
    let scenario = load_scenario(&a.scenario, &cfg)?;
    let grid = match &a.bounds {
        Some(b) if b.len() == 4 => GridSpec::covering(Vec2::new(b[0], b[1]), Vec2::new(b[2], b[3]), a.cell)?,
        Some(_) => return Err(usage("--bounds takes xmin,ymin,xmax,ymax")),
        None => {
            let m = Vec2::new(MAP_MARGIN, MAP_MARGIN);
            GridSpec::covering(scenario.bounds.min - m, scenario.bounds.max + m, a.cell)?
        }
    };
    let (raster, extra): (RiskRaster<f64>, Value) = if forecast.probabilistic {
        let fc = forecasts(&cfg, &scenario, a.ego_id, a.frame, forecast)?;
        if a.step == 0 || a.step > fc.horizon {
            return Err(usage(format!("--step must lie in 1..={}", fc.horizon)));
        }
        let probe = match a.ego_id {
            Some(id) => {
                let now = scenario.state(id, a.frame).ok_or(risknet::Error::EgoAbsent(a.frame))?;
                ego_at_step(now, &fc.motion, a.step, fc.dt)?
            }
            None => stationary_probe(a.frame, &cfg),
        };
        let r = probabilistic_raster(&fc.predictions, &probe, a.step, a.frame, &grid, &cfg.risk, &cfg.fusion)?;
        let extra = json!({
            "mode": if forecast.replay { "replay" } else { "model" },
            "ego_id": a.ego_id,
            "dt": fc.dt,
        });
        (r, extra)
    } else {
        let probe = match a.ego_id {
            Some(id) => scenario
                .state(id, a.frame)
                .cloned()
                .ok_or(risknet::Error::EgoAbsent(a.frame))?,
            None => stationary_probe(a.frame, &cfg),
        };
        let r = rasterize(&scenario, a.frame, &probe, &grid, &cfg.risk, a.ego_id)?;
        (r, json!({ "mode": "deterministic", "ego_id": a.ego_id }))
    };
    let step = forecast.probabilistic.then_some(a.step);
    let config = provenance("map", Some(&scenario), extra, &cfg);
    ensure_parent(out)?;
    write_raster(&raster, out, cfg.io.binary, forecast.probabilistic, step, config)?;
    Ok(())
}

fn set_threshold(cfg: &mut RunConfig, pair: &str) -> Result<(), CliError> {
    let (k, v) = split_pair(pair).map_err(usage)?;
    let v = parse_extended(&v).map_err(usage)?;
    let b = &mut cfg.baselines;
    let slot = match k.as_str() {
        "ttc" => &mut b.ttc_threshold,
        "thw" => &mut b.thw_threshold,
        "rss" => &mut b.rss_margin_threshold,
        "nc_field" => &mut b.nc_field_threshold,
        "risknet" => &mut b.risknet_threshold,
        other => return Err(usage(format!("unknown threshold metric `{other}`"))),
    };
    *slot = v;
    Ok(())
}

pub fn compare(
    common: &Common,
    spec: &str,
    ego: AgentId,
    thresholds: &[String],
    q: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    for t in thresholds {
        set_threshold(&mut cfg, t)?;
    }
    let cfg = cfg.finish()?;
    if !(0.0..=100.0).contains(&q) {
        return Err(usage("--percentile must lie in [0, 100]"));
    }
    let scenario = load_scenario(spec, &cfg)?;
    let rows = evaluate_all(&scenario, ego, &cfg.baselines, &cfg.risk)?;
    let detect = first_detection(&rows, &cfg.baselines);
    let series = |f: fn(&risknet::baselines::ComparisonRow<f64>) -> f64| -> Vec<(i64, f64)> {
        rows.iter().map(|r| (r.frame, f(r))).collect()
    };
    let risknet_q = first_above_percentile(&series(|r| r.risknet_force), q);
    let nc_q = first_above_percentile(&series(|r| r.nc_field), q);
    let ttc_finite = rows.iter().find(|r| r.ttc.is_some()).map(|r| r.frame);

    let mut csv = Vec::new();
    write_comparison_csv(&rows, &mut csv)?;
    let mut summary = String::from("metric,first_frame\n");
    let lines = [
        ("ttc", detect.ttc),
        ("thw", detect.thw),
        ("rss", detect.rss),
        ("nc_field", detect.nc_field),
        ("risknet", detect.risknet),
        ("ttc_finite", ttc_finite),
    ];
    for (name, f) in lines {
        summary.push_str(&format!("{name},{}\n", opt_frame(f)));
    }
    summary.push_str(&format!("nc_field_p{q},{}\n", opt_frame(nc_q)));
    summary.push_str(&format!("risknet_p{q},{}\n", opt_frame(risknet_q)));

    let extra = json!({
        "ego_id": ego,
        "first_detection": detect,
        "first_finite_ttc": ttc_finite,
        "percentile": { "q": q, "risknet": risknet_q, "nc_field": nc_q },
    });
    let side = provenance("compare", Some(&scenario), extra, &cfg);
    match out {
        Some(_) => {
            emit(out, &csv, side)?;
            print!("{summary}");
        }
        None => {
            std::io::stdout().write_all(&csv)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn dataset_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no .csv files in {}", path.display())));
    }
    Ok(files)
}

pub fn train(common: &Common, dataset: &Path, hyper: &HyperFlags, out: &Path) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    apply_hyper(&mut cfg, hyper);
    let cfg = cfg.finish()?;
    if out.extension().is_some_and(|e| e == "f32" || e == "csv") {
        return Err(usage("model path must not end in .f32 or .csv"));
    }
    let mut samples: Vec<Sample<f64>> = Vec::new();
    for file in dataset_files(dataset)? {
        let scenario = load_scenario(&file.to_string_lossy(), &cfg)?;
        samples.extend(extract_windows(&scenario, &cfg.predictor)?);
    }
    if samples.is_empty() {
        return Err(usage("dataset yields no complete training windows"));
    }
    ensure_parent(out)?;
    let (model, curve) = fit(&samples, &cfg.predictor)?;
    let extra = json!({ "windows": samples.len() });
    save_model(&model, out, provenance("train", None, extra, &cfg))?;
    let mut loss = String::from("epoch,mean_nll\n");
    for (e, l) in curve.iter().enumerate() {
        loss.push_str(&format!("{e},{l}\n"));
    }
    let loss_path = out.parent().unwrap_or(Path::new(".")).join("loss.csv");
    std::fs::write(loss_path, loss)?;
    println!(
        "windows={} params={} loss {} -> {}",
        samples.len(),
        model.num_params(),
        curve[0],
        curve[curve.len() - 1]
    );
    Ok(())
}

#[derive(Serialize)]
struct ModeOut {
    pi: f64,
    /// `[x, y, vx, vy]` per step.
    states: Vec<[f64; 4]>,
    cov_diag: Vec<[f64; 4]>,
}

#[derive(Serialize)]
struct PredictionOut {
    agent_id: AgentId,
    frame: i64,
    dt: f64,
    horizon: usize,
    offset: [f64; 2],
    modes: Vec<ModeOut>,
    config: Value,
}

fn load_checked_model(path: &Path, scenario: &Scenario<f64>) -> Result<Model<f64>, CliError> {
    let model = load_model::<f64>(path)?;
    model.hyper.frame_step(scenario.frame_rate)?;
    Ok(model)
}

pub fn predict(
    common: &Common,
    model_path: &Path,
    spec: &str,
    agent: AgentId,
    frame: i64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = resolve(common)?.finish()?;
    let scenario = load_scenario(spec, &cfg)?;
    let model = load_checked_model(model_path, &scenario)?;
    scenario.state(agent, frame).ok_or(risknet::Error::EgoAbsent(frame))?;
    let sample = build_sample(&scenario, agent, frame, &model.hyper, false, Churn::Allow)?.ok_or_else(|| {
        usage(format!(
            "agent {agent} lacks {} history steps at frame {frame}",
            model.hyper.history
        ))
    })?;
    let pred = model.predict_world(&sample)?;
    let modes: Vec<ModeOut> = pred
        .modes
        .iter()
        .map(|m| ModeOut {
            pi: m.pi,
            states: m.states.clone(),
            cov_diag: m.covariances.iter().map(|c| [c[0][0], c[1][1], c[2][2], c[3][3]]).collect(),
        })
        .collect();
    let doc = PredictionOut {
        agent_id: agent,
        frame,
        dt: model.hyper.dt,
        horizon: model.hyper.horizon,
        offset: [scenario.offset.x, scenario.offset.y],
        modes,
        config: cfg.echo(),
    };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match out {
        Some(p) => {
            ensure_parent(p)?;
            std::fs::write(p, text)?
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Table with four decimals.
pub fn format_metrics(windows: usize, m: &Metrics) -> String {
    format!(
        "windows,ade,fde,apde,anll,fnll\n{windows},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
        m.ade, m.fde, m.apde, m.anll, m.fnll
    )
}

pub fn metrics(
    common: &Common,
    model_path: &Path,
    spec: &str,
    agent: Option<AgentId>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = resolve(common)?.finish()?;
    let scenario = load_scenario(spec, &cfg)?;
    let model = load_checked_model(model_path, &scenario)?;
    let windows: Vec<Sample<f64>> = extract_windows(&scenario, &model.hyper)?
        .into_iter()
        .filter(|s| agent.is_none_or(|a| s.target == a))
        .collect();
    if windows.is_empty() {
        return Err(usage("scenario has no complete prediction windows"));
    }
    let per: Vec<Metrics> = windows
        .iter()
        .map(|s| -> Result<Metrics, CliError> {
            let pred = model.forward(s)?;
            Ok(window_metrics(&pred, &s.truth)?)
        })
        .collect::<Result<_, _>>()?;
    let table = format_metrics(windows.len(), &Metrics::mean(&per));
    match out {
        Some(p) => {
            ensure_parent(p)?;
            std::fs::write(p, &table)?
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn write_tracks_with_meta(scenario: &Scenario<f64>, out: &Path, source: &str) -> Result<(), CliError> {
    if out.extension().is_some_and(|e| e == "json") {
        return Err(usage("track output must be a .csv path"));
    }
    ensure_parent(out)?;
    save_tracks(scenario, out)?;
    let meta = TrackMeta {
        frame_rate: scenario.frame_rate,
        source: source.into(),
    };
    std::fs::write(meta_path(out), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn gen_archetype(
    common: &Common,
    name: &str,
    params: &[String],
    rate: Option<f64>,
    duration: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    for p in params {
        let (k, v) = split_pair(p).map_err(usage)?;
        let v: f64 = v.parse().map_err(|_| usage(format!("`{v}` is not a number")))?;
        cfg.io.archetype_params.insert(k, v);
    }
    if let Some(r) = rate {
        cfg.io.archetype_rate = r;
    }
    if let Some(d) = duration {
        cfg.io.archetype_duration = Some(d);
    }
    let cfg = cfg.finish()?;
    let scenario = load_scenario(&format!("archetype:{name}"), &cfg)?;
    write_tracks_with_meta(&scenario, out, &scenario.source)
}

pub fn gen_corpus(common: &Common, tracks: usize, hyper: &HyperFlags, out: &Path) -> Result<(), CliError> {
    let mut cfg = resolve(common)?;
    apply_hyper(&mut cfg, hyper);
    let cfg = cfg.finish()?;
    if tracks == 0 {
        return Err(usage("--tracks must be >= 1"));
    }
    let scenario = synthetic_corpus::<f64>(tracks, &cfg.predictor, cfg.seed)?;
    let source = format!("synthetic tracks={tracks} seed={}", cfg.seed);
    write_tracks_with_meta(&scenario, out, &source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_table_has_four_decimals() {
        let m = Metrics {
            ade: 1.0,
            fde: 0.123456,
            apde: 0.0,
            anll: -2.5,
            fnll: 3.0,
        };
        assert_eq!(
            format_metrics(3, &m),
            "windows,ade,fde,apde,anll,fnll\n3,1.0000,0.1235,0.0000,-2.5000,3.0000\n"
        );
    }

    #[test]
    fn threshold_keys() {
        let mut cfg = RunConfig::default();
        set_threshold(&mut cfg, "ttc=inf").unwrap();
        set_threshold(&mut cfg, "risknet=1500").unwrap();
        assert!(cfg.baselines.ttc_threshold.is_infinite());
        assert_eq!(cfg.baselines.risknet_threshold, 1500.0);
        assert!(set_threshold(&mut cfg, "speed=3").is_err());
        assert!(set_threshold(&mut cfg, "ttc=fast").is_err());
    }
}
