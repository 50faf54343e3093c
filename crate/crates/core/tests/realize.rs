use num_complex::Complex64;
use proptest::prelude::*;
use qweyl_core::generator::Generator;
use qweyl_core::qsym::{corrupted_defining_relations, NCWord};
use qweyl_core::realize::*;

/// β(n)² = q^n sin((n+1)θ) / ((n+1) sin θ).
fn beta_trig(n: u32, theta: f64) -> Complex64 {
    let n1 = f64::from(n + 1);
    let sq = Complex64::from_polar(1.0, theta * f64::from(n))
        * ((n1 * theta).sin() / (n1 * theta.sin()));
    sq.sqrt()
}

fn mono(a: u32, b: u32, c: u32) -> MonomialVec {
    MonomialVec::monomial(MultiIndex::new(a, b, c))
}

#[test]
fn beta_matches_trig_form() {
    for theta in [1e-4, 0.01, 0.1, 0.5, 1.3] {
        for n in 0..12 {
            let got = beta_exact(n, Theta(theta)).value;
            let want = beta_trig(n, theta);
            assert!(
                (got - want).norm() < 1e-13,
                "n={n} θ={theta}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn beta_one_small_theta() {
    // (e^{2iθ} + 1)/2 = e^{iθ} cos θ
    let theta = 0.01_f64;
    let want = Complex64::from_polar(theta.cos().sqrt(), theta / 2.0);
    assert!((beta_exact(1, Theta(theta)).value - want).norm() < 1e-14);
}

#[test]
fn relation_residuals_small() {
    for theta in [0.001, 0.01, 0.1, 0.5] {
        let r = relation_residual_numeric(Theta(theta), 6).unwrap();
        assert_eq!(r.per_relation.len(), 15);
        assert!(r.max_residual <= 1e-12, "θ={theta}: {}", r.max_residual);
    }
    let classical = relation_residual_numeric(Theta(0.0), 6).unwrap();
    assert!(classical.max_residual <= 1e-14);
}

#[test]
fn diagonal_relation_on_xyz() {
    let r = relation_residual_numeric(Theta(0.01), 4).unwrap();
    let d1 = r.per_relation.iter().find(|x| x.name.starts_with("d1 X1"));
    assert!(d1.unwrap().max_residual < 1e-13);
}

#[test]
fn corrupted_table_is_detected() {
    let r = relation_residual_for(&corrupted_defining_relations(), Theta(0.1), 3).unwrap();
    assert!(r.max_residual > 1e-3);
}

#[test]
fn normal_forms_agree_numerically() {
    for w in ["d1 d2 X3 X1", "d3 X3 X3", "d2 X1 d1 X2"] {
        let word: NCWord = w.parse().unwrap();
        assert!(normal_form_residual(&word, Theta(0.3), 4) < 1e-12, "{w}");
    }
}

/// Multipliers of the first-order forms, written out term by term:
/// ∂_X, X: ½iθ(M₁+1) + iθ(M₂+M₃); ∂_Y, Y: ½iθ(M₂+1) + iθM₃; ∂_Z, Z: ½iθ(M₃+1).
fn printed_multiplier(axis: usize, n: [u32; 3], theta: f64) -> Complex64 {
    let m = n.map(f64::from);
    let w = match axis {
        0 => 0.5 * (m[0] + 1.0) + m[1] + m[2],
        1 => 0.5 * (m[1] + 1.0) + m[2],
        _ => 0.5 * (m[2] + 1.0),
    };
    Complex64::new(1.0, theta * w)
}

#[test]
fn paper_mode_structure() {
    let theta = 0.37;
    for n in MultiIndex::up_to_degree(4) {
        for axis in 0..3 {
            let x = apply_first_order(
                Generator::coord(axis),
                &MonomialVec::monomial(n),
                Theta(theta),
                ExpansionMode::Paper,
            );
            let want = printed_multiplier(axis, n.0, theta);
            assert!((x.get(&n.raised(axis)) - want).norm() < 1e-15);
            assert_eq!(x.len(), 1);

            let d = apply_first_order(
                Generator::deriv(axis),
                &MonomialVec::monomial(n),
                Theta(theta),
                ExpansionMode::Paper,
            );
            match n.lowered(axis) {
                None => assert!(d.is_zero()),
                Some(m) => {
                    let want = printed_multiplier(axis, m.0, theta) * f64::from(n.0[axis]);
                    assert!((d.get(&m) - want).norm() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn rederived_multiplier_at_zero_is_one() {
    let v = apply_first_order(
        Generator::X2,
        &mono(0, 0, 0),
        Theta(0.05),
        ExpansionMode::Rederived,
    );
    assert_eq!(v.get(&MultiIndex::new(0, 1, 0)), Complex64::new(1.0, 0.0));
}

#[test]
fn rederived_slope_two() {
    let grid = log_grid(1e-4, 1e-1, 13);
    for n in [
        (2, 2, 2),
        (3, 2, 2),
        (2, 3, 2),
        (2, 2, 3),
        (3, 3, 2),
        (1, 1, 1),
    ] {
        for g in Generator::ALL {
            let out =
                expansion_order_scan(g, &mono(n.0, n.1, n.2), &grid, ExpansionMode::Rederived)
                    .unwrap();
            match out.slope() {
                Some(s) => assert!((s - 2.0).abs() <= 0.1, "{g} {n:?}: {s}"),
                // ∂_Z on (·,·,1) lands on n₃ = 0 where both sides are exactly 1
                None => assert!(g == Generator::D3 && n.2 == 1, "{g} {n:?}"),
            }
        }
    }
}

#[test]
fn paper_slope_one_on_empty_mode() {
    let grid = log_grid(1e-4, 1e-1, 13);
    let out =
        expansion_order_scan(Generator::X1, &mono(0, 0, 0), &grid, ExpansionMode::Paper).unwrap();
    assert!((out.slope().unwrap() - 1.0).abs() <= 0.1);
}

proptest! {
    #[test]
    fn coordinate_norm_is_beta(a in 0u32..8, b in 0u32..8, c in 0u32..8, theta in -3.0f64..3.0, j in 0usize..3) {
        let n = MultiIndex::new(a, b, c);
        let out = apply_exact(Generator::coord(j), &MonomialVec::monomial(n), Theta(theta));
        prop_assert!((out.l2_norm() - beta_exact(n.0[j], Theta(theta)).value.norm()).abs() < 1e-13);
    }

    #[test]
    fn unit_modulus_phases(m in -50i64..50, theta in -6.0f64..6.0) {
        prop_assert!((Theta(theta).q_pow(m).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_exact(theta in -6.0f64..6.0) {
        prop_assert_eq!(beta_exact(0, Theta(theta)).value, Complex64::new(1.0, 0.0));
    }
}
