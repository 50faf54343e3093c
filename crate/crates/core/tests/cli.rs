use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use proptest::prelude::*;
use qweyl_core::cli::{run_command, Command};
use qweyl_core::config::{OutputFormat, RunConfig};
use qweyl_core::evolve::Method;
use qweyl_core::fockspec::HamiltonianModel;
use qweyl_core::realize::ExpansionMode;
use serde_json::Value;

fn bin() -> Proc {
    let mut p = Proc::new(env!("CARGO_BIN_EXE_qweyl"));
    p.env_remove("QWEYL_OUT");
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn small(out: PathBuf) -> RunConfig {
    RunConfig {
        n_max: 6,
        t_final: 0.2,
        out,
        format: OutputFormat::Csv,
        ..RunConfig::default()
    }
}

fn all_commands() -> Vec<Command> {
    vec![
        Command::VerifyAlgebra {
            corrupt_relations: false,
        },
        Command::ExpandScan,
        Command::Effective,
        Command::Spectrum,
        Command::Mixing,
        Command::Evolve {
            alpha_oracle: false,
        },
        Command::Evolve { alpha_oracle: true },
    ]
}

#[test]
fn reruns_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in all_commands() {
        let oa = run_command(&cmd, &small(a.path().into())).unwrap();
        let ob = run_command(&cmd, &small(b.path().into())).unwrap();
        assert_eq!(oa.passed, ob.passed);
        assert_eq!(oa.files.len(), ob.files.len());
        for (fa, fb) in oa.files.iter().zip(&ob.files) {
            assert_eq!(fa.file_name(), fb.file_name());
            if fa.extension().unwrap() == "json" {
                let (mut ja, mut jb) = (read_json(fa), read_json(fb));
                assert!(ja["generated_at"].is_string());
                ja["generated_at"] = Value::Null;
                jb["generated_at"] = Value::Null;
                ja["config"]["out"] = Value::Null;
                jb["config"]["out"] = Value::Null;
                assert_eq!(ja, jb, "{}", fa.display());
            } else if fa.extension().unwrap() == "csv" {
                assert_eq!(
                    std::fs::read(fa).unwrap(),
                    std::fs::read(fb).unwrap(),
                    "{}",
                    fa.display()
                );
            }
        }
    }
}

#[test]
fn verify_algebra_default_passes() {
    let d = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["verify-algebra", "--out"])
        .arg(d.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    let j = read_json(&d.path().join("verify-algebra.json"));
    assert_eq!(j["passed"], true);
    assert_eq!(j["result"]["confluence"]["words"], 500);
    assert_eq!(j["result"]["symbolic"].as_array().unwrap().len(), 15);
}

#[test]
fn verify_algebra_classical_limit() {
    let d = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["verify-algebra", "--theta", "0", "--out"])
        .arg(d.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
}

#[test]
fn corrupted_relations_fail_with_residual() {
    let d = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["verify-algebra", "--corrupt-relations", "--out"])
        .arg(d.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(1));
    let j = read_json(&d.path().join("verify-algebra.json"));
    assert_eq!(j["passed"], false);
    let failing = j["result"]["failing_relations"].as_array().unwrap();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].as_str().unwrap().contains("residual"));
    assert!(j["result"]["numeric"]["max_residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        bin()
            .args(args)
            .arg("--out")
            .arg(d.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(code(&["no-such-command"]), Some(2));
    assert_eq!(code(&["spectrum", "--nmax", "3"]), Some(2));
    assert_eq!(code(&["evolve", "--dt", "-1"]), Some(2));
    assert_eq!(code(&["spectrum", "--mode", "classic"]), Some(2));
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "theta = \"big\"\n").unwrap();
    assert_eq!(
        code(&["effective", "--config", cfg.to_str().unwrap()]),
        Some(2)
    );
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let env_dir = d.path().join("from-env");
    let flag_dir = d.path().join("from-flag");
    let cfg = d.path().join("run.toml");
    std::fs::write(
        &cfg,
        "theta = 0.0\nn_max = 5\nmode = \"rederived\"\nout = \"ignored\"\n",
    )
    .unwrap();
    let st = bin()
        .current_dir(d.path())
        .env("QWEYL_OUT", &env_dir)
        .args(["spectrum", "--config", cfg.to_str().unwrap(), "--nmax", "6"])
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    let j = read_json(&env_dir.join("spectrum.json"));
    assert_eq!(j["config"]["theta"], 0.0);
    assert_eq!(j["config"]["n_max"], 6);
    assert_eq!(j["config"]["mode"], "rederived");
    assert!(!d.path().join("ignored").exists());
    let st = bin()
        .env("QWEYL_OUT", &env_dir)
        .args(["spectrum", "--out"])
        .arg(&flag_dir)
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    assert!(flag_dir.join("spectrum.json").exists());
    // the written config reproduces the run
    let again = RunConfig::load(&env_dir.join("spectrum.config.toml")).unwrap();
    assert_eq!(again.n_max, 6);
    assert_eq!(again.out, env_dir);
}

#[test]
fn spectrum_at_zero_theta_is_exact() {
    let d = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        theta: 0.0,
        n_max: 8,
        out: d.path().into(),
        ..RunConfig::default()
    };
    let o = run_command(&Command::Spectrum, &cfg).unwrap();
    assert!(o.passed);
    let j = read_json(&d.path().join("spectrum.json"));
    for shell in j["result"]["shells"].as_array().unwrap() {
        let k = shell["quanta"].as_f64().unwrap();
        for l in shell["levels"].as_array().unwrap() {
            assert_eq!(l[0].as_f64().unwrap(), k + 1.5);
            assert_eq!(l[1].as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn effective_reports_discrepancies() {
    let d = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out: d.path().into(),
        ..RunConfig::default()
    };
    assert!(run_command(&Command::Effective, &cfg).unwrap().passed);
    let j = read_json(&d.path().join("effective.json"));
    let paper = &j["result"]["modes"][0];
    assert_eq!(paper["mode"], "paper");
    let flags: Vec<bool> = (0..3)
        .map(|k| {
            paper["discrepancies"]["field_of_reference_a"][k]["matches"]
                .as_bool()
                .unwrap()
        })
        .collect();
    assert_eq!(flags, [true, true, false]);
    assert_eq!(j["result"]["printed"]["magnetic_field"][2], "-2 θ y z");
    // every first-order term carries an explicit θ
    for k in 0..3 {
        let a = paper["vector_potential"][k].as_str().unwrap();
        assert!(
            a.split(['+', '-'])
                .filter(|t| !t.trim().is_empty())
                .all(|t| t.contains('θ')),
            "{a}"
        );
    }
    let shift = &j["result"]["rederived_minus_paper"];
    assert_eq!(shift["vector_potential"][0], "-1/2 θ x");
    assert_eq!(shift["real_potential"], "0");
}

#[test]
fn mixing_default_verdict() {
    let d = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out: d.path().into(),
        format: OutputFormat::Csv,
        ..RunConfig::default()
    };
    let o = run_command(&Command::Mixing, &cfg).unwrap();
    assert!(o.passed);
    let j = read_json(&d.path().join("mixing.json"));
    assert_eq!(
        j["result"]["stability_cutoffs"],
        serde_json::json!([6, 8, 10])
    );
    assert_eq!(j["result"]["pattern"]["verdict"]["contained"], false);
    let f = j["result"]["pattern"]["verdict"]["outside_fraction"]
        .as_f64()
        .unwrap();
    assert!(f > 0.9 && f < 1.0);
    let csv = std::fs::read_to_string(d.path().join("mixing.csv")).unwrap();
    assert!(csv.starts_with("mode,theta,n_max,model,"));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn evolve_alpha_oracle_table() {
    let d = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        n_max: 4,
        t_final: 1.0,
        alpha: 0.5,
        out: d.path().into(),
        format: OutputFormat::Csv,
        ..RunConfig::default()
    };
    let o = run_command(&Command::Evolve { alpha_oracle: true }, &cfg).unwrap();
    assert!(o.passed);
    let csv = std::fs::read_to_string(d.path().join("evolve-decay.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(cols[1], 1.0);
    assert!((cols[2] - (-1.0f64).exp()).abs() < 1e-8);
    let j = read_json(&d.path().join("evolve.json"));
    assert_eq!(j["result"]["metadata"]["method"], "expm");
    assert_eq!(j["result"]["metadata"]["dt"], 1e-3);
}

#[test]
fn evolve_reports_ground_state_rate() {
    // the substituted Hamiltonian loses norm from the ground state at first order
    let d = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        n_max: 6,
        t_final: 0.1,
        method: Method::Rk4,
        out: d.path().into(),
        ..RunConfig::default()
    };
    let o = run_command(
        &Command::Evolve {
            alpha_oracle: false,
        },
        &cfg,
    )
    .unwrap();
    assert!(!o.passed);
    let j = read_json(&d.path().join("evolve.json"));
    assert!((j["result"]["initial_rate"].as_f64().unwrap() + 0.03).abs() < 1e-12);
    let checks = j["result"]["checks"].as_array().unwrap();
    let by = |n: &str| {
        checks.iter().find(|c| c["name"] == n).unwrap()["passed"]
            .as_bool()
            .unwrap()
    };
    assert!(by("norm_flow") && by("edge_occupation") && !by("ground_state_initial_rate"));
    // the published decomposition keeps the ground state at first order
    let r = RunConfig {
        model: HamiltonianModel::Reference,
        n_max: 8,
        ..cfg
    };
    assert!(
        run_command(
            &Command::Evolve {
                alpha_oracle: false
            },
            &r
        )
        .unwrap()
        .passed
    );
}

fn mode_strategy() -> impl Strategy<Value = ExpansionMode> {
    prop_oneof![Just(ExpansionMode::Paper), Just(ExpansionMode::Rederived)]
}

proptest! {
    #[test]
    fn config_round_trip(
        theta in -1.0f64..1.0,
        n_max in 1u32..20,
        degree in 2u32..10,
        mode in mode_strategy(),
        t_final in 0.0f64..100.0,
        dt in 1e-6f64..1.0,
        alpha in -2.0f64..2.0,
        csv in any::<bool>(),
        rk4 in any::<bool>(),
        dir in "[a-z]{1,8}(/[a-z]{1,8}){0,2}",
    ) {
        let c = RunConfig {
            theta, n_max, degree, mode, t_final, dt, alpha,
            out: PathBuf::from(dir),
            format: if csv { OutputFormat::Csv } else { OutputFormat::Json },
            method: if rk4 { Method::Rk4 } else { Method::Expm },
            model: HamiltonianModel::Substituted,
        };
        let text = c.to_toml().unwrap();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}
