use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use diva_core::io::config::PipelineConfig;
use diva_core::io::pipeline::*;
use diva_core::io::PeakReport;

fn diva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diva"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(path: &Path, input: &Path, out_dir: &Path, epochs: usize) {
    let mut cfg = PipelineConfig::default().with_seed(3);
    cfg.train.epochs = epochs;
    cfg.paths.input = Some(input.to_path_buf());
    cfg.paths.out_dir = Some(out_dir.to_path_buf());
    std::fs::write(path, cfg.to_json()).unwrap();
}

/// Parses an SVG file and counts elements per `class` attribute.
fn svg_classes(path: &Path) -> HashMap<String, usize> {
    let text = std::fs::read_to_string(path).unwrap();
    let doc =
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let mut counts = HashMap::new();
    for class in doc.descendants().filter_map(|n| n.attribute("class")) {
        *counts.entry(class.to_string()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(code(&diva(&["--help"])), 0);
    assert_eq!(code(&diva(&["--version"])), 0);
    assert_eq!(code(&diva(&[])), 1);
    assert_eq!(code(&diva(&["pipeline", "--bogus"])), 1);
    assert_eq!(code(&diva(&["synth", "--preset", "nope"])), 1);
}

#[test]
fn config_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = diva(&["pipeline", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"train_fraction": 1.5}"#).unwrap();
    let out = diva(&["pipeline", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    std::fs::write(&bad, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(
        code(&diva(&["pipeline", "--config", bad.to_str().unwrap()])),
        1
    );

    // valid config, input file absent
    let cfg = dir.path().join("cfg.json");
    write_config(&cfg, &dir.path().join("none.csv"), dir.path(), 1);
    let out = diva(&["preprocess", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    // analyze without a trained model
    let csv = dir.path().join("c.csv");
    std::fs::write(&csv, "wavenumber,a:0:0\n600,1\n601,2\n602,1\n").unwrap();
    write_config(&cfg, &csv, dir.path(), 1);
    let out = diva(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error"));
}

#[test]
fn staged_commands_match_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = diva(&["synth", "--seed", "5", "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let corpus = data.join("corpus.csv");
    assert!(corpus.exists() && data.join("manifest.json").exists());

    let staged = dir.path().join("staged");
    let cfg = dir.path().join("staged.json");
    write_config(&cfg, &corpus, &staged, 4);
    let c = cfg.to_str().unwrap();
    for cmd in ["preprocess", "train", "analyze", "report"] {
        let out = diva(&[cmd, "--config", c]);
        assert_eq!(code(&out), 0, "{cmd}: {}", stderr(&out));
    }
    for f in [
        DERIVATIVES_FILE,
        PREPROCESS_FILE,
        MODEL_FILE,
        TRAINING_FILE,
        LATENT_FILE,
        CHARACTERISTIC_FILE,
        REPORT_FILE,
        SCATTER_PLOT,
        OVERLAY_PLOT,
        PEAKS_PLOT,
    ] {
        assert!(staged.join(f).exists(), "{f} missing");
    }

    let full = dir.path().join("full");
    let cfg2 = dir.path().join("full.json");
    write_config(&cfg2, &corpus, &full, 4);
    let out = diva(&[
        "pipeline",
        "--config",
        cfg2.to_str().unwrap(),
        "--top-k",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let a = PeakReport::load(&staged.join(REPORT_FILE)).unwrap();
    let b = PeakReport::load(&full.join(REPORT_FILE)).unwrap();
    assert_eq!(a.model_checksum, b.model_checksum);
    assert_eq!(
        std::fs::read(staged.join(MODEL_FILE)).unwrap(),
        std::fs::read(full.join(MODEL_FILE)).unwrap()
    );
    assert!(a.training.is_some());
    assert_eq!(a.conditions.len(), 4);
    assert!(a.conditions.iter().all(|c| c.peaks.len() <= 5));
    assert!(b.conditions.iter().all(|c| c.peaks.len() <= 3));
    assert_eq!(b.config.top_k, 3);

    let latent = std::fs::read_to_string(full.join(LATENT_FILE)).unwrap();
    assert_eq!(latent.lines().count(), 1 + 160);

    let scatter = svg_classes(&full.join(SCATTER_PLOT));
    assert_eq!(scatter["point"], 160);
    assert_eq!(scatter["median"], 4);
    let overlay = svg_classes(&full.join(OVERLAY_PLOT));
    assert_eq!(overlay["curve"], 4);
    let bars = svg_classes(&full.join(PEAKS_PLOT));
    assert_eq!(bars["panel"], 4);
    let reported: usize = b.conditions.iter().map(|c| c.peaks.len()).sum();
    assert_eq!(bars.get("bar").copied().unwrap_or(0), reported);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        code(&diva(&[
            "synth",
            "--preset",
            "baseline-only",
            "--out",
            data.to_str().unwrap()
        ])),
        0
    );
    let cfg = dir.path().join("cfg.json");
    write_config(&cfg, &data.join("corpus.csv"), &dir.path().join("o"), 1);
    let out = diva(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "42",
        "--epochs",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = PeakReport::load(&dir.path().join("o").join(REPORT_FILE)).unwrap();
    assert_eq!(r.seed, 42);
    assert_eq!(r.config.train.seed, 42);
    assert_eq!(r.training.unwrap().epochs, 2);
}

#[test]
fn flags_alone_run_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&diva(&["synth", "--out", data.to_str().unwrap()])), 0);
    let corpus = data.join("corpus.csv");
    let out_dir = dir.path().join("o");
    let out = diva(&[
        "pipeline",
        "--input",
        corpus.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--epochs",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = PeakReport::load(&out_dir.join(REPORT_FILE)).unwrap();
    assert_eq!(r.config.paths.input.as_deref(), Some(corpus.as_path()));
    assert_eq!(r.seed, 0);
}
