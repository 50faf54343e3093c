use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qweyl_core::evolve::*;
use qweyl_core::fockspec::*;
use qweyl_core::realize::{ExpansionMode, MultiIndex};
use qweyl_core::Error;

fn mi(a: u32, b: u32, c: u32) -> MultiIndex {
    MultiIndex::new(a, b, c)
}

fn opts(t_final: f64, dt: f64, method: Method) -> PropagateOptions {
    PropagateOptions {
        t_final,
        dt,
        method,
        stride: 1,
        edge_threshold: Some(EDGE_THRESHOLD),
    }
}

fn damped(h0: &DMatrix<Complex64>, alpha: f64) -> DMatrix<Complex64> {
    h0 - DMatrix::identity(h0.nrows(), h0.ncols()) * Complex64::new(0.0, alpha)
}

#[test]
fn unitary_at_zero_theta() {
    let h = build_h_eff(6, 0.0, ExpansionMode::Paper).unwrap();
    let b = h.basis;
    // superposition of low states, away from the edge
    let mut psi = DVector::zeros(b.dim());
    for (k, n) in [mi(0, 0, 0), mi(1, 0, 2), mi(2, 1, 0), mi(0, 3, 1)]
        .iter()
        .enumerate()
    {
        psi[b.index(n).unwrap()] = Complex64::new(1.0 + k as f64, 0.5 * k as f64);
    }
    psi /= Complex64::new(psi.norm(), 0.0);
    let t = propagate(&h.matrix, b, &psi, &opts(10.0, 1e-3, Method::Expm)).unwrap();
    assert!(t.aborted.is_none());
    assert_eq!(t.times.len(), 10_001);
    let worst = t.norms.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst:e}");
    let flow = norm_flow_check(&t, &h.matrix).unwrap();
    assert!(flow.points.iter().all(|p| p.predicted.abs() < 1e-14));
}

#[test]
fn decay_law() {
    let h0 = build_h_eff(4, 0.0, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h0.basis, &mi(0, 0, 0)).unwrap();
    for alpha in [0.1, 0.5, 1.0] {
        let h = damped(&h0.matrix, alpha);
        let t = propagate(&h, h0.basis, &psi, &opts(5.0, 1e-3, Method::Expm)).unwrap();
        for (ti, p) in t.times.iter().zip(&t.norms) {
            let want = (-2.0 * alpha * ti).exp();
            assert!(
                (p - want).abs() <= 1e-8 * want,
                "α={alpha} t={ti}: {p} vs {want}"
            );
        }
        let flow = norm_flow_check(&t, &h).unwrap();
        assert!(flow.max_deviation < 1e-5, "{:e}", flow.max_deviation);
        for pt in &flow.points {
            // dP/dt = −2αP
            let p = (-2.0 * alpha * pt.time).exp();
            assert!((pt.predicted + 2.0 * alpha * p).abs() < 1e-10);
        }
    }
}

#[test]
fn decay_at_one() {
    let h0 = build_h_eff(4, 0.0, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h0.basis, &mi(0, 0, 0)).unwrap();
    let t = propagate(
        &damped(&h0.matrix, 0.5),
        h0.basis,
        &psi,
        &opts(1.0, 1e-3, Method::Rk4),
    )
    .unwrap();
    assert!((t.norms.last().unwrap() - (-1.0f64).exp()).abs() < 1e-8);
}

#[test]
fn integrators_agree() {
    let h = build_h_eff(10, 0.01, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    let a = propagate(&h.matrix, h.basis, &psi, &opts(1.0, 1e-3, Method::Expm)).unwrap();
    let b = propagate(&h.matrix, h.basis, &psi, &opts(1.0, 1e-3, Method::Rk4)).unwrap();
    let na = a.final_state().norm();
    let nb = b.final_state().norm();
    assert!((na - nb).abs() <= 1e-6, "{na} {nb}");
    assert!((a.final_state() - b.final_state()).norm() <= 1e-6);
}

#[test]
fn rk4_step_guard() {
    let h = build_h_eff(10, 0.01, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    let err = propagate(&h.matrix, h.basis, &psi, &opts(1.0, 0.05, Method::Rk4)).unwrap_err();
    assert!(matches!(err, Error::StepSize { .. }));
    // the exponential has no step restriction
    assert!(propagate(&h.matrix, h.basis, &psi, &opts(0.1, 0.05, Method::Expm)).is_ok());
}

#[test]
fn norm_flow_full_hamiltonian() {
    for mode in ExpansionMode::BOTH {
        let h = build_h_eff(10, 0.01, mode).unwrap();
        let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
        let mut o = opts(5.0, 1e-3, Method::Expm);
        o.stride = 50;
        let t = propagate(&h.matrix, h.basis, &psi, &o).unwrap();
        assert!(t.aborted.is_none(), "{mode}");
        assert!(t.norms.iter().all(|p| *p > 0.0));
        let flow = norm_flow_check(&t, &h.matrix).unwrap();
        assert!(
            flow.max_deviation <= 1e-6,
            "{mode}: {:e}",
            flow.max_deviation
        );
    }
}

#[test]
fn initial_norm_rate_from_ground() {
    // 2θ⟨0|H₁ᴵ|0⟩; the substituted operator has ⟨0|H₁|0⟩ = −3i/2 (paper) and −3i (rederived)
    for (mode, shift) in [
        (ExpansionMode::Paper, -1.5),
        (ExpansionMode::Rederived, -3.0),
    ] {
        let h = build_h_eff(10, 0.01, mode).unwrap();
        let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
        let rate = norm_rate(&h.matrix, &psi);
        assert!((rate - 2.0 * 0.01 * shift).abs() < 1e-12, "{mode}: {rate}");
    }
    // the published decomposition has odd V_I and no first-order loss from the ground state
    let split =
        SplitHamiltonian::build(10, ExpansionMode::Paper, HamiltonianModel::Reference).unwrap();
    let h = split.at(0.01);
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    assert!(norm_rate(&h.matrix, &psi).abs() < 1e-9);
}

#[test]
fn constant_occupations_at_zero_theta() {
    let h = build_h_eff(5, 0.0, ExpansionMode::Paper).unwrap();
    let b = h.basis;
    let mut psi = DVector::zeros(b.dim());
    psi[b.index(&mi(0, 0, 0)).unwrap()] = Complex64::new(0.6, 0.0);
    psi[b.index(&mi(1, 1, 0)).unwrap()] = Complex64::new(0.0, 0.8);
    let mut o = opts(2.0, 1e-2, Method::Expm);
    o.stride = 10;
    let t = propagate(&h.matrix, b, &psi, &o).unwrap();
    let states = [mi(0, 0, 0), mi(1, 1, 0), mi(2, 0, 0)];
    let map = gain_loss_map(&t, &states, 1e-12).unwrap();
    for (s, want) in map.series.iter().zip([0.36, 0.64, 0.0]) {
        assert!(
            s.occupations.iter().all(|o| (o - want).abs() < 1e-12),
            "{}",
            s.state
        );
        assert_eq!(s.trend, Trend::Flat);
    }
}

#[test]
fn occupation_follows_sparsity() {
    let split =
        SplitHamiltonian::build(10, ExpansionMode::Paper, HamiltonianModel::Substituted).unwrap();
    let h = split.at(0.01);
    let b = h.basis;
    let offsets = sparsity_pattern(&split.h1, b, COUPLING_TOL, INTERIOR_MARGIN).offset_set();
    let reachable: BTreeSet<MultiIndex> = offsets
        .iter()
        .filter(|o| o.iter().all(|&d| d >= 0))
        .map(|o| mi(o[0] as u32, o[1] as u32, o[2] as u32))
        .collect();
    let psi = basis_state(b, &mi(0, 0, 0)).unwrap();
    let t = propagate(&h.matrix, b, &psi, &opts(1e-3, 1e-3, Method::Expm)).unwrap();
    let last = t.final_state();
    for i in 0..b.dim() {
        let n = b.state(i);
        let occ = last[i].norm_sqr();
        if reachable.contains(&n) {
            assert!(occ > 1e-12, "{n}: {occ:e}");
        } else {
            assert!(occ <= 1e-10, "{n}: {occ:e}");
        }
    }
    let map = gain_loss_map(&t, &[mi(0, 0, 0), mi(2, 0, 0)], 0.0).unwrap();
    assert_eq!(map.series[0].trend, Trend::Decay);
    assert_eq!(map.series[1].trend, Trend::Growth);
}

#[test]
fn short_time_transfer() {
    let h = build_h_eff(10, 0.01, ExpansionMode::Paper).unwrap();
    let b = h.basis;
    let n = mi(1, 0, 0);
    let psi = basis_state(b, &n).unwrap();
    let t = propagate(&h.matrix, b, &psi, &opts(1e-3, 1e-4, Method::Expm)).unwrap();
    let tf = *t.times.last().unwrap();
    let mut checked = 0;
    for m in [mi(3, 0, 0), mi(1, 2, 0), mi(1, 0, 2)] {
        let hmn = h.element(&m, &n).unwrap();
        assert!(hmn.norm() > 1e-6);
        let occ = t.final_state()[b.index(&m).unwrap()].norm_sqr();
        let want = hmn.norm_sqr() * tf * tf;
        assert!((occ / want - 1.0).abs() < 1e-2, "{m}: {occ:e} vs {want:e}");
        checked += 1;
    }
    assert_eq!(checked, 3);
}

#[test]
fn edge_monitor_stops_run() {
    // a large deformation pumps weight to the cutoff quickly
    let h = build_h_eff(4, 0.5, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    let t = propagate(&h.matrix, h.basis, &psi, &opts(5.0, 1e-3, Method::Expm)).unwrap();
    let abort = t.aborted.expect("edge reached");
    assert!(abort.occupation > EDGE_THRESHOLD);
    assert!(h.basis.is_edge(&abort.state));
    assert!(abort.time < 5.0);
    assert_eq!(*t.times.last().unwrap(), abort.time);
}

#[test]
fn rejects_bad_input() {
    let h = build_h_eff(3, 0.0, ExpansionMode::Paper).unwrap();
    let unnormalized = DVector::from_element(h.basis.dim(), Complex64::new(1.0, 0.0));
    assert!(propagate(
        &h.matrix,
        h.basis,
        &unnormalized,
        &opts(1.0, 1e-2, Method::Expm)
    )
    .is_err());
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    assert!(propagate(&h.matrix, h.basis, &psi, &opts(1.0, 0.0, Method::Expm)).is_err());
    let short = propagate(&h.matrix, h.basis, &psi, &opts(1e-3, 1e-3, Method::Expm)).unwrap();
    assert!(matches!(
        norm_flow_check(&short, &h.matrix),
        Err(Error::TooFewPoints { .. })
    ));
}

#[test]
fn overflow_is_reported() {
    let h0 = build_h_eff(2, 0.0, ExpansionMode::Paper).unwrap();
    let h = damped(&h0.matrix, -400.0);
    let psi = basis_state(h0.basis, &mi(0, 0, 0)).unwrap();
    let mut o = opts(5.0, 1e-2, Method::Expm);
    o.edge_threshold = None;
    assert!(matches!(
        propagate(&h, h0.basis, &psi, &o),
        Err(Error::NonFinite { .. })
    ));
}

#[test]
fn csv_export() {
    let h = build_h_eff(3, 0.01, ExpansionMode::Paper).unwrap();
    let psi = basis_state(h.basis, &mi(0, 0, 0)).unwrap();
    let mut o = opts(0.01, 1e-3, Method::Expm);
    o.stride = 5;
    let t = propagate(&h.matrix, h.basis, &psi, &o).unwrap();
    assert_eq!(t.samples.len(), 3);
    let mut buf = Vec::new();
    let prov = [
        ("mode", "paper".to_string()),
        ("theta", "0.01".to_string()),
        ("n_max", "3".to_string()),
    ];
    write_trajectory_csv(&mut buf, &t, &h.matrix, &[mi(0, 0, 0), mi(2, 0, 0)], &prov).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,theta,n_max,t,P,re_h_i,occ_0_0_0,occ_2_0_0"
    );
    assert!(lines.next().unwrap().starts_with("paper,0.01,3,0,1,"));
    assert_eq!(text.lines().count(), 4);
}
