#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use qweyl_core::groundfx::{CPoly3, DiffOp3, GaussianPoly};
use qweyl_core::realize::MultiIndex;
use qweyl_core::scalar::{gauss_int, Rational};

fn rat_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap()
}

/// Physicists' Hermite polynomial in variable `axis`, integer coefficients.
pub fn hermite(n: u32, axis: usize) -> CPoly3 {
    let x = CPoly3::var(axis);
    let (mut prev, mut cur) = (CPoly3::zero(), CPoly3::one());
    for k in 0..n {
        let next = x
            .mul(&cur)
            .scale(&gauss_int(2, 0))
            .sub(&prev.scale(&gauss_int(2 * i64::from(k), 0)));
        prev = cur;
        cur = next;
    }
    cur
}

pub fn hermite_norm(n: u32) -> f64 {
    let fact: f64 = (1..=n).map(f64::from).product();
    1.0 / (2f64.powi(n as i32) * fact * std::f64::consts::PI.sqrt()).sqrt()
}

/// Gauss–Hermite nodes and weights for `∫ f e^{−t²}` via the Jacobi matrix.
pub fn gauss_hermite(k: usize) -> Vec<(f64, f64)> {
    let j = DMatrix::from_fn(k, k, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            (
                eig.eigenvalues[i],
                std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2),
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub struct Quadrature {
    nodes: Vec<(f64, f64)>,
}

impl Quadrature {
    pub fn new(k: usize) -> Self {
        Self {
            nodes: gauss_hermite(k),
        }
    }

    /// `⟨m|op|n⟩` with the θ symbol set to `theta`.
    pub fn element(&self, op: &DiffOp3, m: &MultiIndex, n: &MultiIndex, theta: f64) -> Complex64 {
        let ket = (0..3).fold(CPoly3::one(), |acc, k| acc.mul(&hermite(n.0[k], k)));
        let bra = (0..3).fold(CPoly3::one(), |acc, k| acc.mul(&hermite(m.0[k], k)));
        let integrand = bra.mul(&op.apply(&GaussianPoly::new(ket)).p);
        let norm: f64 = (0..3)
            .map(|k| hermite_norm(m.0[k]) * hermite_norm(n.0[k]))
            .product();
        // Gauss–Hermite sums of each monomial factor t^a
        let moment = |a: u32| -> f64 { self.nodes.iter().map(|(t, w)| w * t.powi(a as i32)).sum() };
        let mut total = Complex64::new(0.0, 0.0);
        for (e, deg, c) in integrand.terms() {
            let c = Complex64::new(rat_f64(&c.re), rat_f64(&c.im)) * theta.powi(i32::from(deg));
            total += c * (moment(e[0]) * moment(e[1]) * moment(e[2]));
        }
        total * norm
    }
}

pub fn states_up_to(total: u32) -> Vec<MultiIndex> {
    MultiIndex::up_to_degree(total)
}
