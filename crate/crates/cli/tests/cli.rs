use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use risknet::baselines::{evaluate_all, BaselineConfig};
use risknet::predictor::{save_model, Model, PredictorHyper};
use risknet::risk_field::RiskFieldParams;
use risknet::scenario::{make_archetype, Archetype, EGO_ID};
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risknet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "risknet {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Rows of a CSV without its header, split on commas.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// `n_frames` of straight constant-velocity motion per `(id, y, vx)`.
fn cv_csv(dir: &Path, name: &str, agents: &[(u64, f64, f64)], frames: std::ops::Range<i64>, dt: f64) {
    let mut s = String::from("frame,id,x,y,xVelocity,yVelocity,width,height\n");
    for f in frames {
        for &(id, y, vx) in agents {
            s.push_str(&format!("{f},{id},{},{y},{vx},0,4.5,1.8\n", vx * f as f64 * dt));
        }
    }
    std::fs::write(dir.join(name), s).unwrap();
}

fn summary(stdout: &str) -> BTreeMap<String, String> {
    stdout
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn single_agent_eval_is_all_zero() {
    let d = TempDir::new().unwrap();
    cv_csv(d.path(), "one.csv", &[(1, 0.0, 12.0)], 0..20, 0.1);
    let out = ok(d.path(), &["eval", "--scenario", "one.csv", "--ego-id", "1", "--frame-rate", "10"]);
    let r = rows(&out);
    assert_eq!(r.len(), 20);
    assert!(r.iter().all(|row| row[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn rear_archetype_eval_matches_library_with_one_episode() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["eval", "--scenario", "archetype:rear_overtake_cut_in", "--ego-id", "1", "--out", "e.csv"]);
    let force: Vec<f64> = rows(&read(d.path(), "e.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    let s = make_archetype::<f64>(Archetype::RearOvertakeCutIn, &BTreeMap::new(), 10.0, 12.0).unwrap();
    let lib = evaluate_all(&s, EGO_ID, &BaselineConfig::default(), &RiskFieldParams::default()).unwrap();
    assert_eq!(force.len(), lib.len());
    for (a, b) in force.iter().zip(&lib) {
        assert_eq!(*a, b.risknet_force);
    }
    let above: Vec<bool> = force.iter().map(|&f| f > 2000.0).collect();
    let rises = above.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(above[0]);
    assert_eq!(rises, 1);
    assert!(d.path().join("e.json").exists());
}

#[test]
fn missing_ego_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["eval", "--scenario", "archetype:lateral_cut_in", "--ego-id", "99"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(d.path(), &["eval", "--scenario", "nope.csv", "--ego-id", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn empty_frame_map_is_zero_with_sidecar() {
    let d = TempDir::new().unwrap();
    let mut s = String::from("frame,id,x,y,xVelocity,yVelocity,width,height\n");
    for f in 0..4 {
        s.push_str(&format!("{f},1,{},0,10,0,4.5,1.8\n", f as f64));
    }
    for f in 8..12 {
        s.push_str(&format!("{f},2,{},3,10,0,4.5,1.8\n", f as f64));
    }
    std::fs::write(d.path().join("gap.csv"), s).unwrap();
    ok(
        d.path(),
        &["map", "--scenario", "gap.csv", "--frame-rate", "10", "--frame", "6", "--bounds", "-5,-5,5,5", "--out", "m"],
    );
    let values: Vec<f64> = read(d.path(), "m.csv")
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(values.len(), 100);
    assert!(values.iter().all(|&v| v == 0.0));
    let side: serde_json::Value = serde_json::from_str(&read(d.path(), "m.json")).unwrap();
    assert_eq!(side["frame"], 6);
    assert_eq!(side["width"], 10);
}

#[test]
fn replay_map_equals_deterministic_map_bytes() {
    let d = TempDir::new().unwrap();
    let scen = "archetype:lateral_cut_in";
    for binary in [false, true] {
        let mut det = vec!["map", "--scenario", scen, "--ego-id", "1", "--frame", "26", "--out", "det"];
        let mut rep = vec![
            "map", "--scenario", scen, "--ego-id", "1", "--frame", "20", "--step", "3", "--probabilistic", "--replay",
            "--out", "rep",
        ];
        if binary {
            det.push("--binary");
            rep.push("--binary");
        }
        ok(d.path(), &det);
        ok(d.path(), &rep);
        let ext = if binary { "bin" } else { "csv" };
        let a = std::fs::read(d.path().join(format!("det.{ext}"))).unwrap();
        let b = std::fs::read(d.path().join(format!("rep.{ext}"))).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{ext} payloads differ");
    }
}

#[test]
fn compare_lateral_detects_before_ttc() {
    let d = TempDir::new().unwrap();
    let out = ok(d.path(), &["compare", "--scenario", "archetype:lateral_cut_in", "--ego-id", "1", "--out", "c.csv"]);
    let s = summary(&out);
    let risk: i64 = s["risknet"].parse().unwrap();
    let ttc: i64 = s["ttc"].parse().unwrap();
    assert!(risk < ttc, "{risk} vs {ttc}");
    let p90: i64 = s["risknet_p90"].parse().unwrap();
    let finite: i64 = s["ttc_finite"].parse().unwrap();
    assert!(p90 < finite);
    assert!(read(d.path(), "c.csv").starts_with("frame,ttc,thw,rss_margin,nc_field,risknet_force\n"));
}

#[test]
fn compare_with_ego_alone_detects_nothing() {
    let d = TempDir::new().unwrap();
    cv_csv(d.path(), "one.csv", &[(1, 0.0, 20.0)], 0..30, 0.1);
    let out = run(d.path(), &["compare", "--scenario", "one.csv", "--ego-id", "1", "--frame-rate", "10"]);
    assert!(out.status.success());
    let s = summary(&String::from_utf8(out.stderr).unwrap());
    assert_eq!(s.len(), 8);
    assert!(s.values().all(|v| v == "none"), "{s:?}");
}

#[test]
fn infinite_thresholds_disable_detection_only() {
    let d = TempDir::new().unwrap();
    let scen = "archetype:rear_overtake_cut_in";
    let base = ok(d.path(), &["compare", "--scenario", scen, "--ego-id", "1", "--out", "a.csv"]);
    let mut args = vec!["compare", "--scenario", scen, "--ego-id", "1", "--out", "b.csv"];
    for t in ["ttc=inf", "thw=inf", "rss=inf", "nc_field=inf", "risknet=inf"] {
        args.extend(["--threshold", t]);
    }
    let off = summary(&ok(d.path(), &args));
    for k in ["ttc", "thw", "rss", "nc_field", "risknet"] {
        assert_eq!(off[k], "none", "{k}");
    }
    assert_ne!(summary(&base)["risknet"], "none");
    assert_eq!(read(d.path(), "a.csv"), read(d.path(), "b.csv"));
}

fn toy_corpus(dir: &Path) {
    ok(dir, &["gen", "corpus", "--tracks", "8", "--history", "4", "--horizon", "3", "--out", "toy.csv"]);
}

#[test]
fn zero_epochs_writes_initial_loss_only() {
    let d = TempDir::new().unwrap();
    toy_corpus(d.path());
    ok(
        d.path(),
        &["train", "--dataset", "toy.csv", "--epochs", "0", "--hidden", "4", "--history", "4", "--horizon", "3", "--out", "m/model.json"],
    );
    let loss = read(d.path(), "m/loss.csv");
    assert_eq!(loss.lines().count(), 2);
    assert!(loss.starts_with("epoch,mean_nll\n0,"));
}

#[test]
fn training_is_seeded_and_reduces_loss() {
    let d = TempDir::new().unwrap();
    toy_corpus(d.path());
    let args = |out: &'static str| {
        vec![
            "train", "--dataset", "toy.csv", "--epochs", "60", "--hidden", "6", "--history", "4", "--horizon", "3",
            "--seed", "3", "--out", out,
        ]
    };
    ok(d.path(), &args("a/model.json"));
    ok(d.path(), &args("b/model.json"));
    let pa = std::fs::read(d.path().join("a/model.f32")).unwrap();
    let pb = std::fs::read(d.path().join("b/model.f32")).unwrap();
    assert!(!pa.is_empty());
    assert_eq!(pa, pb);
    assert_eq!(read(d.path(), "a/model.json"), read(d.path(), "b/model.json"));
    let curve: Vec<f64> = rows(&read(d.path(), "a/loss.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(curve.len(), 61);
    assert!(curve[60] < curve[0]);
}

#[test]
fn zero_model_on_constant_velocity_tracks_has_zero_error() {
    let d = TempDir::new().unwrap();
    cv_csv(d.path(), "cv.csv", &[(1, 0.0, 8.0), (2, 500.0, 12.0)], 0..12, 0.2);
    let hyper = PredictorHyper {
        hidden: 4,
        modes: 2,
        history: 3,
        horizon: 4,
        ..Default::default()
    };
    let mut model = Model::<f64>::zeros(&hyper);
    model.dec.noise_b.iter_mut().for_each(|b| *b = -800.0);
    save_model(&model, &d.path().join("zero.json"), serde_json::json!({})).unwrap();
    let out = ok(d.path(), &["metrics", "--model", "zero.json", "--scenario", "cv.csv", "--frame-rate", "5"]);
    let r = &rows(&out)[0];
    assert_eq!(r[1], "0.0000");
    assert_eq!(r[2], "0.0000");
    assert_eq!(r[3], "0.0000");
}

#[test]
fn malformed_manifest_exits_with_usage_code() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("bad.json"), r#"{"format_version": 9}"#).unwrap();
    let out = run(d.path(), &["predict", "--model", "bad.json", "--scenario", "archetype:lateral_cut_in", "--ego-id", "2", "--frame", "30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format version 9"));
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let d = TempDir::new().unwrap();
    toy_corpus(d.path());
    let out = run(
        d.path(),
        &["train", "--dataset", "toy.csv", "--epochs", "20", "--lr", "1e100", "--history", "4", "--horizon", "3", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn schema_override_renames_columns() {
    let d = TempDir::new().unwrap();
    let mut s = String::from("frame,id,x,y,vx,yVelocity,width,height\n");
    for f in 0..10 {
        s.push_str(&format!("{f},1,{},0,10,0,4.5,1.8\n{f},2,{},0,5,0,4.5,1.8\n", f as f64, 20.0 + 0.5 * f as f64));
    }
    std::fs::write(d.path().join("r.csv"), s).unwrap();
    let args = ["eval", "--scenario", "r.csv", "--ego-id", "1", "--frame-rate", "10"];
    assert_eq!(run(d.path(), &args).status.code(), Some(2));
    let mut with = args.to_vec();
    with.extend(["--schema", "xVelocity=vx"]);
    let out = ok(d.path(), &with);
    assert!(rows(&out).iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn predict_writes_mixture_json() {
    let d = TempDir::new().unwrap();
    let hyper = PredictorHyper {
        hidden: 4,
        modes: 2,
        history: 3,
        horizon: 4,
        ..Default::default()
    };
    save_model(&Model::<f64>::init(&hyper).unwrap(), &d.path().join("m.json"), serde_json::json!({})).unwrap();
    ok(
        d.path(),
        &["predict", "--model", "m.json", "--scenario", "archetype:lateral_cut_in", "--ego-id", "2", "--frame", "30", "--out", "p.json"],
    );
    let v: serde_json::Value = serde_json::from_str(&read(d.path(), "p.json")).unwrap();
    assert_eq!(v["agent_id"], 2);
    assert_eq!(v["horizon"], 4);
    let modes = v["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 2);
    let total: f64 = modes.iter().map(|m| m["pi"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(modes[0]["states"].as_array().unwrap().len(), 4);
    assert!(v["config"].is_object());
}
