use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bdarma_core::io::{RunConfig, SeriesFile, StudySection};
use bdarma_core::model::Variant;
use bdarma_core::sampler::MetricKind;

fn bdarma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdarma"))
        .args(args)
        .output()
        .expect("run bdarma")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, what: &[&str], seed: &str) -> PathBuf {
    let out = dir.join(format!("sim-{}-{seed}", what[1]));
    let mut args = vec!["simulate"];
    args.extend_from_slice(what);
    args.extend_from_slice(&["--seed", seed, "--out", s(&out)]);
    let o = bdarma(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Shrinks the sampler of a simulated config so the test stays quick.
fn quick_config(src: &Path, dst: &Path, edit: impl FnOnce(&mut RunConfig)) {
    let mut cfg = RunConfig::read(src).unwrap();
    cfg.sampler.chains = 2;
    cfg.sampler.warmup = 60;
    cfg.sampler.draws = 40;
    cfg.sampler.metric = MetricKind::Diag;
    edit(&mut cfg);
    cfg.write(dst).unwrap();
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_scenario_shape_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), &["--scenario", "k0.5_dneg_p0"], "1");
    let series = SeriesFile::read(&a.join("series.csv")).unwrap();
    assert_eq!((series.len(), series.parts.len()), (120, 5));

    let b = dir.path().join("again");
    let o = bdarma(&["simulate", "--scenario", "k0.5_dneg_p0", "--seed", "1", "--out", s(&b)]);
    assert!(o.status.success());
    for f in ["series.csv", "truth.json", "config.toml", "covariates.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = simulate(dir.path(), &["--scenario", "k0.5_dneg_p0"], "2");
    assert_ne!(std::fs::read(a.join("series.csv")).unwrap(), std::fs::read(c.join("series.csv")).unwrap());
}

#[test]
fn covid_like_preset_shape() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulate(dir.path(), &["--preset", "covid-like"], "3");
    let series = SeriesFile::read(&p.join("series.csv")).unwrap();
    assert_eq!((series.len(), series.parts.len()), (85, 10));
    assert_eq!(series.labels[0].to_string(), "2014-01");
    assert_eq!(series.labels[84].to_string(), "2021-01");
    let truth = std::fs::read_to_string(p.join("truth.json")).unwrap();
    assert!(truth.contains("synthetic"));
    let cfg = RunConfig::read(&p.join("config.toml")).unwrap();
    assert_eq!(cfg.rolling.unwrap().origins.len(), 7);
}

#[test]
fn usage_and_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bdarma(&["simulate"])), 2);
    assert_eq!(code(&bdarma(&["simulate", "--scenario", "nope", "--out", s(dir.path())])), 2);
    assert_eq!(code(&bdarma(&["frobnicate"])), 2);

    let sim = simulate(dir.path(), &["--scenario", "k1.0_dpos_p0"], "1");
    let missing = dir.path().join("missing.csv");
    let o = bdarma(&["fit", "--data", s(&missing), "--config", s(&sim.join("config.toml"))]);
    assert_eq!(code(&o), 4);

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "schema_version = 1\nvariant = \"baseline\"\nsamplr = 1\n").unwrap();
    let o = bdarma(&["fit", "--data", s(&sim.join("series.csv")), "--config", s(&bad_cfg)]);
    assert_eq!(code(&o), 2);

    let text = std::fs::read_to_string(sim.join("series.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[5] = "5,0.2,0.2,oops,0.2,0.2".into();
    let corrupt = dir.path().join("corrupt.csv");
    std::fs::write(&corrupt, lines.join("\n")).unwrap();
    let o = bdarma(&["fit", "--data", s(&corrupt), "--config", s(&sim.join("config.toml"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 6"));

    let study_cfg = dir.path().join("study.toml");
    let mut cfg = RunConfig::new(Variant::Intervention);
    cfg.break_at = Some(bdarma_core::io::TimeRef::Position(60));
    cfg.study = Some(StudySection {
        scenarios: vec![],
        ..Default::default()
    });
    cfg.write(&study_cfg).unwrap();
    assert_eq!(code(&bdarma(&["study", "--config", s(&study_cfg), "--out", s(dir.path())])), 2);
}

#[test]
fn fit_is_deterministic_and_forecast_reads_its_draws() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--scenario", "k1.0_dpos_p0.3"], "4");
    let cfg = dir.path().join("quick.toml");
    quick_config(&sim.join("config.toml"), &cfg, |_| {});
    let data = sim.join("series.csv");
    let fits: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("fit{i}"))).collect();
    for f in &fits {
        let o = bdarma(&["fit", "--data", s(&data), "--config", s(&cfg), "--out", s(f), "--no-strict"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["draws.csv", "diagnostics.json"] {
        assert_eq!(std::fs::read(fits[0].join(name)).unwrap(), std::fs::read(fits[1].join(name)).unwrap());
    }
    let header = std::fs::read_to_string(fits[0].join("draws.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("chain,iteration,") && header.ends_with(",lp__,divergent"));
    assert!(header.contains("Delta"));

    let o = bdarma(&[
        "forecast", "--draws", s(&fits[0].join("draws.csv")), "--data", s(&data), "--config", s(&cfg),
        "--horizon", "4", "--raw", "--out", s(&fits[0]),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(fits[0].join("forecast_summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4 * 5);
    assert_eq!(&rows[0][1], "121");
    for h in 0..4 {
        let total: f64 = rows[h * 5..(h + 1) * 5].iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
    assert!(fits[0].join("forecast_draws.csv").exists());

    // a baseline config cannot read intervention draws
    let base_cfg = dir.path().join("base.toml");
    quick_config(&sim.join("config.toml"), &base_cfg, |c| c.variant = Variant::Baseline);
    let o = bdarma(&[
        "forecast", "--draws", s(&fits[0].join("draws.csv")), "--data", s(&data), "--config", s(&base_cfg),
        "--out", s(&fits[0]),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("baseline"));

    let base_fit = dir.path().join("basefit");
    let o = bdarma(&["fit", "--data", s(&data), "--config", s(&base_cfg), "--out", s(&base_fit), "--no-strict"]);
    assert_eq!(code(&o), 0);
    let header = std::fs::read_to_string(base_fit.join("draws.csv")).unwrap();
    let header = header.lines().next().unwrap();
    for name in ["Delta", "tau", "kappa", "v[", "delta_phi", "beta"] {
        assert!(!header.contains(name), "{name}");
    }
}

#[test]
fn strict_mode_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--scenario", "k0.5_dpos_p0"], "5");
    let cfg = dir.path().join("tiny.toml");
    quick_config(&sim.join("config.toml"), &cfg, |c| {
        c.sampler.warmup = 10;
        c.sampler.draws = 10;
    });
    let out = dir.path().join("fit");
    let o = bdarma(&["fit", "--data", s(&sim.join("series.csv")), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("draws.csv").exists() && out.join("diagnostics.json").exists());
}

#[test]
fn compare_with_one_model_and_short_windows() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &["--scenario", "k1.0_dneg_p0"], "6");
    let cfg = dir.path().join("cmp.toml");
    quick_config(&sim.join("config.toml"), &cfg, |c| {
        c.variant = Variant::Baseline;
        c.rolling = Some(bdarma_core::io::RollingSection {
            origins: vec![
                bdarma_core::io::TimeRef::Position(10),
                bdarma_core::io::TimeRef::Position(118),
                bdarma_core::io::TimeRef::Label("120".into()),
            ],
            horizons: vec![1, 3],
            variants: vec![Variant::Baseline],
        });
    });
    let out = dir.path().join("cmp");
    let o = bdarma(&["compare", "--data", s(&sim.join("series.csv")), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("compare_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "model,horizon,n,aitchison,energy,plugin_log_score,coverage,mae");
    // h=1 from origins 118 and 120, h=3 from 118 only; origin 10 is too short
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("baseline,1,2,"));
    assert!(lines[2].starts_with("baseline,3,1,"));
    let report = std::fs::read_to_string(out.join("compare.json")).unwrap();
    assert!(report.contains("\"origin\": 10"));
}
