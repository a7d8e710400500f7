use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsim::cli::{AlphaChoice, RunConfig, SweepPoint, SWEEP_HEADER};
use tsim::forward::{PhantomSpec, Snr};
use tsim::grid::GridSpec;
use tsim::gwf::RestoreLog;
use tsim::tvol;

fn small_config(out: &Path, fine_n: usize, pitch: f64) -> RunConfig {
    let fine = GridSpec::cubic(fine_n, pitch).unwrap();
    RunConfig {
        phantom: PhantomSpec { spoke_length: 1.2, ..PhantomSpec::default() },
        fine_grid: fine,
        data_grid: fine.downsampled().unwrap(),
        output_dir: out.to_path_buf(),
        ..RunConfig::desk(0.75, 2.7)
    }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn tsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsim"))
        .args(args)
        .env_remove("TSIM_CONFIG")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tvol_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("img_") && n.ends_with(".tvol"))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_restore_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let acq = tmp.path().join("acq");
    let mut cfg = small_config(&acq, 128, 20.0);
    cfg.snr_db = vec![Snr::Db(20.0)];
    cfg.seed = 11;
    let config = write_config(tmp.path(), &cfg);

    let o = tsim(&["simulate", "--config", p(&config)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let images = tvol_files(&acq);
    assert_eq!(images.len(), 9);
    assert!(acq.join("manifest.json").exists() && acq.join("truth.tvol").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(acq.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["provenance"]["config_sha256"], cfg.hash());
    assert_eq!(manifest["snr_db"], 20.0);

    // Alpha defaults to the 20 dB value.
    let o = tsim(&["restore", p(&acq)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log: RestoreLog = serde_json::from_str(&fs::read_to_string(acq.join("restore_log.json")).unwrap()).unwrap();
    assert_eq!(log.alpha, 5.5e-4);
    let restored = tvol::read_real(&acq.join("restored.tvol")).unwrap();
    assert_eq!(*restored.grid(), cfg.fine_grid);

    let eval = tmp.path().join("eval");
    let o = tsim(&[
        "evaluate",
        "--config",
        p(&config),
        "--truth",
        p(&acq.join("truth.tvol")),
        "--restored",
        p(&acq.join("truth.tvol")),
        "--out",
        p(&eval),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mse"], 0.0);
    assert_eq!(report["ssim_pct"], 100.0);
    let csv = fs::read_to_string(eval.join("profiles/restored_xz_theory.csv")).unwrap();
    assert!(csv.starts_with("angle_deg,intensity\n"));
    assert!(csv.lines().count() > 75 * 8);
    assert!(eval.join("sections/restored_spectrum_xz.pgm").exists());
}

#[test]
fn simulate_is_byte_identical_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let mut cfg = small_config(&out, 64, 40.0);
        cfg.snr_db = vec![Snr::Db(15.0)];
        cfg.seed = 3;
        let cfg_dir = tmp.path().join(format!("{run}_cfg"));
        fs::create_dir(&cfg_dir).unwrap();
        let config = write_config(&cfg_dir, &cfg);
        let o = tsim(&["simulate", "--config", p(&config)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(out);
    }
    let names = tvol_files(&outs[0]);
    assert_eq!(names, tvol_files(&outs[1]));
    for n in &names {
        assert_eq!(fs::read(outs[0].join(n)).unwrap(), fs::read(outs[1].join(n)).unwrap(), "{n}");
    }
}

#[test]
fn validation_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("out"), 64, 40.0);
    cfg.optics.u_m = 6.0;
    let config = write_config(tmp.path(), &cfg);
    let o = tsim(&["simulate", "--config", p(&config)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("u_m"), "{}", stderr(&o));

    let o = tsim(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TSIM_CONFIG"));

    let mut cfg = small_config(&tmp.path().join("out"), 64, 40.0);
    cfg.alphas.clear();
    let config = write_config(tmp.path(), &cfg);
    let o = tsim(&["sweep", "--config", p(&config)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alphas"));
}

#[test]
fn config_path_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let cfg = small_config(&out, 64, 40.0);
    let config = write_config(tmp.path(), &cfg);
    let o = Command::new(env!("CARGO_BIN_EXE_tsim"))
        .args(["simulate", "--snr", "inf"])
        .env("TSIM_CONFIG", &config)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(tvol_files(&out).len(), 9);
}

#[test]
fn damaged_acquisitions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let acq = tmp.path().join("acq");
    let cfg = small_config(&acq, 64, 40.0);
    let config = write_config(tmp.path(), &cfg);
    assert!(tsim(&["simulate", "--config", p(&config)]).status.success());
    let names = tvol_files(&acq);

    let victim = acq.join(&names[4]);
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, b"XXXX").unwrap();
    let o = tsim(&["restore", p(&acq), "--alpha", "1e-4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    fs::remove_file(&victim).unwrap();
    let o = tsim(&["restore", p(&acq)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&names[4]), "{}", stderr(&o));
    fs::write(&victim, bytes).unwrap();
    assert!(tsim(&["restore", p(&acq)]).status.success());
}

#[test]
fn evaluate_rejects_incompatible_extents() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.tvol");
    let b = tmp.path().join("b.tvol");
    let g = GridSpec::cubic(64, 20.0).unwrap();
    tvol::write_real(&a, &tsim::grid::RealVolume::constant(g, 1.0), tvol::DType::F64).unwrap();
    let g2 = GridSpec::cubic(64, 40.0).unwrap();
    tvol::write_real(&b, &tsim::grid::RealVolume::constant(g2, 1.0), tvol::DType::F64).unwrap();
    let cfg = small_config(tmp.path(), 64, 40.0);
    let config = write_config(tmp.path(), &cfg);
    let o = tsim(&["evaluate", "--config", p(&config), "--truth", p(&a), "--restored", p(&b)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), 64, 40.0);
    cfg.snr_db = vec![Snr::Infinite, Snr::Db(15.0)];
    cfg.alphas = vec![AlphaChoice::Keyword(tsim::cli::AlphaKeyword::Auto)];
    cfg.sweep = vec![
        SweepPoint { um_ratio: 0.8, l_mm: 2.4 },
        SweepPoint { um_ratio: 0.5, l_mm: 3.8 },
    ];
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(format!("w{workers}"));
        cfg.output_dir = out.clone();
        let config = write_config(tmp.path(), &cfg);
        let o = tsim(&["sweep", "--config", p(&config), "--workers", workers, "--no-timing"]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read_to_string(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let lines: Vec<&str> = csvs[0].lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 5);
    // Sorted by modulation, then SNR with the noiseless case last.
    assert!(lines[1].starts_with("0.5,3.8,15,0.001,"));
    assert!(lines[2].starts_with("0.5,3.8,inf,0.0001,"));
    assert!(lines[3].starts_with("0.8,2.4,15,"));
    for l in &lines[1..] {
        assert!(l.ends_with(",,ok"), "{l}");
    }
}
