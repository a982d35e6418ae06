use std::process::Command;

use olas::config::{AlgorithmId, HintConfig, KeywordOr, RunConfig};
use olas::olas_core::model::predict_label;
use olas::olas_core::rng::{substream, Substream};
use olas::olas_core::shiftsim::ShiftKind;
use olas::{dynamic_regret_diagnostic, prepare_offline, run_experiment, run_online};

fn small(algo: AlgorithmId, shift: ShiftKind, t: usize) -> RunConfig {
    let mut c = RunConfig::benchmark(algo, shift);
    c.horizon = t;
    c.batch_size = 10;
    c.offline_size = 300;
    c
}

#[test]
fn same_seed_same_result() {
    for algo in [AlgorithmId::Fth, AlgorithmId::Uogd, AlgorithmId::Atlas] {
        let c = small(algo, ShiftKind::Ber, 60);
        let a = run_experiment(&c, 5).unwrap();
        let b = run_experiment(&c, 5).unwrap();
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.deployed, b.deployed);
        assert_eq!(a.summary.final_avg_error, b.summary.final_avg_error);
    }
}

#[test]
fn one_round_fix_scores_f0_on_the_batch() {
    let c = small(AlgorithmId::Fix, ShiftKind::Squ, 1);
    let phase = prepare_offline(&c, 2).unwrap();
    let r = run_online(&c, 2, &phase).unwrap();
    let trace = olas::harness::schedule_for(&c, 3, 2).unwrap().trace().unwrap();
    let mut rng = substream(2, Substream::Stream);
    let batch = phase.source.sample(&trace.priors[0], c.batch_size, &mut rng).unwrap();
    let wrong = batch
        .features()
        .iter_rows()
        .zip(batch.hidden_labels())
        .filter(|(x, y)| predict_label(&phase.f0, x).unwrap() != **y)
        .count();
    assert_eq!(r.summary.final_avg_error, wrong as f64 / c.batch_size as f64);
}

#[test]
fn running_average_matches_instant_errors() {
    let c = small(AlgorithmId::Uogd, ShiftKind::Sin, 150);
    let r = run_experiment(&c, 1).unwrap();
    let mean = r.rounds.iter().map(|x| x.instant_error).sum::<f64>() / r.rounds.len() as f64;
    assert!((r.rounds.last().unwrap().avg_error - mean).abs() < 1e-12);
    assert!((r.summary.final_avg_error - mean).abs() < 1e-12);
}

#[test]
fn dynamic_regret_is_nonnegative() {
    for (algo, shift) in [
        (AlgorithmId::Fix, ShiftKind::Lin),
        (AlgorithmId::Uogd, ShiftKind::Squ),
        (AlgorithmId::Atlas, ShiftKind::Ber),
        (AlgorithmId::Ftfwh, ShiftKind::Sin),
    ] {
        let c = small(algo, shift, 80);
        let phase = prepare_offline(&c, 0).unwrap();
        let r = run_online(&c, 0, &phase).unwrap();
        let d = dynamic_regret_diagnostic(&r, &phase).unwrap();
        assert!(d >= -1e-4, "{algo:?} on {shift:?}: {d}");
    }
}

#[test]
fn comparator_at_f0_has_zero_regret() {
    // The balanced offline prior is the stationary prior, so f0 is the
    // comparator up to its training tolerance.
    let mut c = small(AlgorithmId::Fix, ShiftKind::Lin, 30);
    c.shift.mu1 = Some(vec![1.0 / 3.0; 3]);
    c.shift.mu2 = Some(vec![1.0 / 3.0; 3]);
    c.offline.tol = 1e-9;
    c.offline.max_iters = 100_000;
    let phase = prepare_offline(&c, 0).unwrap();
    let r = run_online(&c, 0, &phase).unwrap();
    let d = dynamic_regret_diagnostic(&r, &phase).unwrap();
    assert!(d.abs() < 1e-4, "{d}");
}

#[test]
fn atlas_runs_respect_the_meta_regret_bound() {
    for shift in ShiftKind::ALL {
        let c = small(AlgorithmId::Atlas, shift, 100);
        let r = run_experiment(&c, 7).unwrap();
        assert_eq!(r.summary.meta_regret_within_bound(), Some(true), "{shift:?}");
    }
}

#[test]
fn hinted_runs_report_hint_diagnostics() {
    let mut c = small(AlgorithmId::AtlasAda, ShiftKind::Squ, 30);
    c.algorithm.hint = Some(HintConfig {
        kind: "periodic".into(),
        length: 6,
        mix: KeywordOr::Keyword("running".into()),
    });
    c.shift.period = Some(6);
    let r = run_experiment(&c, 0).unwrap();
    assert!(r.summary.hint_grad_gap.unwrap() >= 0.0);
    assert!(!r.summary.transductive);
    c.algorithm.hint.as_mut().unwrap().kind = "forward".into();
    let r = run_experiment(&c, 0).unwrap();
    assert!(r.summary.transductive);
}

fn olas() -> Command {
    Command::new(env!("CARGO_BIN_EXE_olas"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, small(AlgorithmId::Uogd, ShiftKind::Lin, 20).to_toml_string().unwrap()).unwrap();
    let out = dir.path().join("out");
    let s = olas()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--algo", "atlas", "--shift", "ber", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(out.join("seed_4/rounds.csv").exists());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("atlas") && summary.contains("ber"));

    let s = olas().args(["run", "--config"]).arg(&cfg).args(["--algo", "rogd"]).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    std::fs::write(&cfg, "horizon = 3\n").unwrap();
    let s = olas().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(s.status.code(), Some(2));

    let s = olas().args(["verify", "--suite", "bogus"]).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    let s = olas().args(["verify", "--suite", "simplex", "--out"]).arg(dir.path()).output().unwrap();
    assert!(s.status.success());
    assert!(String::from_utf8_lossy(&s.stdout).contains("PASS simplex_projection"));
    assert!(dir.path().join("verify_simplex.csv").exists());

    let s = olas().args(["template", "--algo", "fth", "--shift", "sin"]).output().unwrap();
    let text = String::from_utf8(s.stdout).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::benchmark(AlgorithmId::Fth, ShiftKind::Sin));
}
