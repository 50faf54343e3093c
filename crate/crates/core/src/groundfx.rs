//! Polynomial-times-Gaussian calculus for the deformed ground state.
//!
//! Functions are `p(x, y, z) e^{−r²/2}` with `p` a [`CPoly3`]; operators are
//! [`DiffOp3`] sums `c(x) ∂^α`. `θ` is a formal real symbol and every product
//! is truncated after the linear term, so all results are exact first-order
//! polynomials with Gaussian-rational coefficients.
//!
//! Two Hamiltonians are built from the first-order generators:
//!
//! * [`hamiltonian_operator`] substitutes the operator forms
//!   `X_j ≈ x_j F_j`, `∂_{X_j} ≈ F_j ∂_j` into `½Σ(P_j² + X_j²)` and composes
//!   honestly. It is valid on every state but carries up to third derivatives.
//! * [`replacement_operator`] treats the ground-state actions
//!   `∂_{X_j}Ψ = (∂_j + u_j)Ψ`, `X_jΨ = (x_j + w_j)Ψ` as operator
//!   replacements `∂_j ↦ ∂_j + u_j`, `x_j ↦ x_j + w_j`. Only this one has the
//!   `½Σ(p − A)² + V_R + iV_I` shape.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::generator::Generator;
use crate::realize::{first_order_form, ExpansionMode};
use crate::scalar::{
    fmt_gauss, gauss, gauss_i, gauss_int, gauss_real, gauss_to_c64, rat, GaussRat, Rational,
};

pub type Exps = [u32; 3];

const VARS: [&str; 3] = ["x", "y", "z"];

fn unit(axis: usize) -> Exps {
    let mut e = [0; 3];
    e[axis] = 1;
    e
}

/// Commutative polynomial in `(x, y, z)` and a formal `θ`, truncated at `θ¹`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CPoly3 {
    terms: BTreeMap<(Exps, u8), GaussRat>,
}

impl CPoly3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(gauss_int(1, 0))
    }

    pub fn constant(c: GaussRat) -> Self {
        Self::term([0, 0, 0], 0, c)
    }

    /// `c θ^d x^a y^b z^c`; empty when `d > 1`.
    pub fn term(e: Exps, theta_degree: u8, c: GaussRat) -> Self {
        let mut p = Self::zero();
        p.add_term(e, theta_degree, c);
        p
    }

    pub fn var(axis: usize) -> Self {
        Self::term(unit(axis), 0, gauss_int(1, 0))
    }

    /// The formal symbol `θ`.
    pub fn theta() -> Self {
        Self::term([0, 0, 0], 1, gauss_int(1, 0))
    }

    /// `iθ`.
    pub fn i_theta() -> Self {
        Self::term([0, 0, 0], 1, gauss_i())
    }

    /// Builds `Σ c e` from `(exponents, coefficient)` pairs, all at the same θ order.
    pub fn from_terms(theta_degree: u8, terms: &[(Exps, GaussRat)]) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(*e, theta_degree, c.clone());
        }
        p
    }

    fn add_term(&mut self, e: Exps, d: u8, c: GaussRat) {
        if d > 1 || c.is_zero() {
            return;
        }
        let slot = self.terms.entry((e, d)).or_insert_with(GaussRat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&(e, d));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exps, u8, &GaussRat)> {
        self.terms.iter().map(|((e, d), c)| (*e, *d, c))
    }

    pub fn coeff(&self, e: Exps, theta_degree: u8) -> GaussRat {
        self.terms
            .get(&(e, theta_degree))
            .cloned()
            .unwrap_or_else(GaussRat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn add(&self, other: &CPoly3) -> CPoly3 {
        let mut out = self.clone();
        for ((e, d), c) in &other.terms {
            out.add_term(*e, *d, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &CPoly3) -> CPoly3 {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> CPoly3 {
        self.scale(&gauss_int(-1, 0))
    }

    pub fn scale(&self, s: &GaussRat) -> CPoly3 {
        let mut out = Self::zero();
        for ((e, d), c) in &self.terms {
            out.add_term(*e, *d, c * s);
        }
        out
    }

    pub fn scale_rat(&self, num: i64, den: i64) -> CPoly3 {
        self.scale(&gauss_real(rat(num, den)))
    }

    pub fn mul(&self, other: &CPoly3) -> CPoly3 {
        let mut out = Self::zero();
        for ((ea, da), ca) in &self.terms {
            for ((eb, db), cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                out.add_term(e, da + db, ca * cb);
            }
        }
        out
    }

    pub fn mul_var(&self, axis: usize) -> CPoly3 {
        let mut out = Self::zero();
        for ((e, d), c) in &self.terms {
            let mut e = *e;
            e[axis] += 1;
            out.add_term(e, *d, c.clone());
        }
        out
    }

    pub fn deriv(&self, axis: usize) -> CPoly3 {
        let mut out = Self::zero();
        for ((e, d), c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut e2 = *e;
            e2[axis] -= 1;
            out.add_term(e2, *d, c * gauss_int(i64::from(e[axis]), 0));
        }
        out
    }

    pub fn deriv_multi(&self, alpha: Exps) -> CPoly3 {
        let mut p = self.clone();
        for (axis, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                p = p.deriv(axis);
            }
        }
        p
    }

    /// Coefficient polynomial of `θ^d` (returned without the θ factor).
    pub fn theta_order(&self, d: u8) -> CPoly3 {
        let mut out = Self::zero();
        for ((e, dd), c) in &self.terms {
            if *dd == d {
                out.add_term(*e, 0, c.clone());
            }
        }
        out
    }

    /// Coefficientwise real part (θ is real).
    pub fn real_part(&self) -> CPoly3 {
        self.map_coeffs(|c| gauss_real(c.re.clone()))
    }

    /// Coefficientwise imaginary part, as a real polynomial.
    pub fn imag_part(&self) -> CPoly3 {
        self.map_coeffs(|c| gauss_real(c.im.clone()))
    }

    fn map_coeffs(&self, f: impl Fn(&GaussRat) -> GaussRat) -> CPoly3 {
        let mut out = Self::zero();
        for ((e, d), c) in &self.terms {
            out.add_term(*e, *d, f(c));
        }
        out
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(e, _)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Every monomial has even total degree (true for zero).
    pub fn is_even(&self) -> bool {
        self.terms
            .keys()
            .all(|(e, _)| e.iter().sum::<u32>() % 2 == 0)
    }

    /// Every monomial has odd total degree (true for zero).
    pub fn is_odd(&self) -> bool {
        self.terms
            .keys()
            .all(|(e, _)| e.iter().sum::<u32>() % 2 == 1)
    }

    /// `∫ p |Ψ|²` for unit-norm `Ψ = π^{−3/4} e^{−r²/2}`, split by θ order.
    pub fn gaussian_moment(&self) -> [GaussRat; 2] {
        let mut out = [GaussRat::zero(), GaussRat::zero()];
        for ((e, d), c) in &self.terms {
            if let Some(m) = e
                .iter()
                .map(|&n| one_dim_moment(n))
                .product::<Option<Rational>>()
            {
                out[*d as usize] += c * gauss_real(m);
            }
        }
        out
    }

    pub fn eval(&self, point: [f64; 3], theta: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|((e, d), c)| {
                let mono: f64 = (0..3).map(|k| point[k].powi(e[k] as i32)).product();
                gauss_to_c64(c) * mono * theta.powi(i32::from(*d))
            })
            .sum()
    }
}

/// `∫ t^n e^{−t²} dt / √π`: `(n−1)!!/2^{n/2}` for even `n`, `None` for odd.
fn one_dim_moment(n: u32) -> Option<Rational> {
    if n % 2 == 1 {
        return None;
    }
    let mut m = Rational::one();
    let mut k = 1;
    while k < n {
        m *= rat(i64::from(k), 2);
        k += 2;
    }
    Some(m)
}

impl fmt::Display for CPoly3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        // θ-free terms first, then θ terms; descending degree inside each.
        let mut keys: Vec<&(Exps, u8)> = self.terms.keys().collect();
        keys.sort_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| b.0.iter().sum::<u32>().cmp(&a.0.iter().sum::<u32>()))
                .then_with(|| b.0.cmp(&a.0))
        });
        for (idx, key) in keys.into_iter().enumerate() {
            let c = &self.terms[key];
            let (e, d) = *key;
            let mut factors: Vec<String> = Vec::new();
            if d == 1 {
                factors.push("θ".into());
            }
            for (k, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => factors.push(VARS[k].into()),
                    _ => factors.push(format!("{}^{}", VARS[k], p)),
                }
            }
            let negative = if c.re.is_zero() {
                c.im.is_negative()
            } else {
                c.im.is_zero() && c.re.is_negative()
            };
            let mag = if negative { -c.clone() } else { c.clone() };
            let coef = if mag.is_one() && !factors.is_empty() {
                String::new()
            } else {
                fmt_gauss(&mag)
            };
            let body = match (coef.is_empty(), factors.is_empty()) {
                (true, _) => factors.join(" "),
                (false, true) => coef,
                (false, false) => format!("{} {}", coef, factors.join(" ")),
            };
            match (idx, negative) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => write!(f, "{body}")?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

fn rat_f64(r: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

impl Serialize for CPoly3 {
    /// `{"(a,b,c)": [[re, im, theta_degree], ...]}`.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut grouped: BTreeMap<Exps, Vec<(f64, f64, u8)>> = BTreeMap::new();
        for ((e, d), c) in &self.terms {
            grouped
                .entry(*e)
                .or_default()
                .push((rat_f64(&c.re), rat_f64(&c.im), *d));
        }
        let mut map = serializer.serialize_map(Some(grouped.len()))?;
        for (e, v) in grouped {
            map.serialize_entry(&format!("({},{},{})", e[0], e[1], e[2]), &v)?;
        }
        map.end()
    }
}

/// `p(x) e^{−r²/2}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GaussianPoly {
    pub p: CPoly3,
}

impl GaussianPoly {
    /// The ground state up to normalization (`p = 1`).
    pub fn ground() -> Self {
        Self { p: CPoly3::one() }
    }

    pub fn new(p: CPoly3) -> Self {
        Self { p }
    }

    /// `∂_j (p e^{−r²/2}) = (∂_j p − x_j p) e^{−r²/2}`.
    pub fn deriv(&self, axis: usize) -> Self {
        Self {
            p: self.p.deriv(axis).sub(&self.p.mul_var(axis)),
        }
    }

    pub fn mul_poly(&self, c: &CPoly3) -> Self {
        Self { p: self.p.mul(c) }
    }

    pub fn add(&self, other: &GaussianPoly) -> Self {
        Self {
            p: self.p.add(&other.p),
        }
    }
}

/// `Σ_α c_α(x) ∂^α`, coefficients on the left.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiffOp3 {
    terms: BTreeMap<Exps, CPoly3>,
}

fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * i64::from(n - i) / i64::from(i + 1))
}

impl DiffOp3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::multiply(CPoly3::one())
    }

    pub fn multiply(c: CPoly3) -> Self {
        Self::term(c, [0, 0, 0])
    }

    pub fn partial(axis: usize) -> Self {
        Self::term(CPoly3::one(), unit(axis))
    }

    /// `M_j = x_j ∂_j`.
    pub fn euler(axis: usize) -> Self {
        Self::term(CPoly3::var(axis), unit(axis))
    }

    pub fn term(c: CPoly3, alpha: Exps) -> Self {
        let mut op = Self::zero();
        op.add_term(alpha, c);
        op
    }

    fn add_term(&mut self, alpha: Exps, c: CPoly3) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(alpha).or_default();
        *slot = slot.add(&c);
        if slot.is_zero() {
            self.terms.remove(&alpha);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exps, &CPoly3)> {
        self.terms.iter().map(|(a, c)| (*a, c))
    }

    pub fn coeff(&self, alpha: Exps) -> CPoly3 {
        self.terms.get(&alpha).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total derivative order present.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &DiffOp3) -> DiffOp3 {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(*a, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffOp3) -> DiffOp3 {
        self.add(&other.scale(&gauss_int(-1, 0)))
    }

    pub fn scale(&self, s: &GaussRat) -> DiffOp3 {
        self.mul_left(&CPoly3::constant(s.clone()))
    }

    pub fn mul_left(&self, p: &CPoly3) -> DiffOp3 {
        let mut out = Self::zero();
        for (a, c) in &self.terms {
            out.add_term(*a, p.mul(c));
        }
        out
    }

    /// `self ∘ other` via the Leibniz rule.
    pub fn compose(&self, other: &DiffOp3) -> DiffOp3 {
        let mut out = Self::zero();
        for (alpha, c) in &self.terms {
            for (beta, d) in &other.terms {
                for g0 in 0..=alpha[0] {
                    for g1 in 0..=alpha[1] {
                        for g2 in 0..=alpha[2] {
                            let gamma = [g0, g1, g2];
                            let mult = (0..3).map(|k| binom(alpha[k], gamma[k])).product::<i64>();
                            let dd = d.deriv_multi(gamma);
                            if dd.is_zero() {
                                continue;
                            }
                            let order = [
                                alpha[0] - g0 + beta[0],
                                alpha[1] - g1 + beta[1],
                                alpha[2] - g2 + beta[2],
                            ];
                            out.add_term(order, c.mul(&dd).scale(&gauss_int(mult, 0)));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, f: &GaussianPoly) -> GaussianPoly {
        let mut out = GaussianPoly::new(CPoly3::zero());
        for (alpha, c) in &self.terms {
            let mut g = f.clone();
            for (axis, &k) in alpha.iter().enumerate() {
                for _ in 0..k {
                    g = g.deriv(axis);
                }
            }
            out = out.add(&g.mul_poly(c));
        }
        out
    }

    /// Action on a bare polynomial (no envelope).
    pub fn apply_poly(&self, p: &CPoly3) -> CPoly3 {
        self.terms.iter().fold(CPoly3::zero(), |acc, (alpha, c)| {
            acc.add(&c.mul(&p.deriv_multi(*alpha)))
        })
    }

    /// Coefficient operator of `θ^d`.
    pub fn theta_order(&self, d: u8) -> DiffOp3 {
        let mut out = Self::zero();
        for (a, c) in &self.terms {
            out.add_term(*a, c.theta_order(d));
        }
        out
    }
}

impl fmt::Display for DiffOp3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(a, c)| {
                let mut d = String::new();
                for (k, &n) in a.iter().enumerate() {
                    match n {
                        0 => {}
                        1 => d.push_str(&format!(" ∂{}", VARS[k])),
                        _ => d.push_str(&format!(" ∂{}^{}", VARS[k], n)),
                    }
                }
                format!("[{c}]{d}")
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Serialize)]
struct DiffOpTerm<'a> {
    deriv: Exps,
    coeff: &'a CPoly3,
}

impl Serialize for DiffOp3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v: Vec<DiffOpTerm<'_>> = self
            .terms
            .iter()
            .map(|(a, c)| DiffOpTerm {
                deriv: *a,
                coeff: c,
            })
            .collect();
        v.serialize(serializer)
    }
}

/// `F_j = 1 + iθ (c + Σ_k m_k M_k)` as an operator.
fn first_order_factor(axis: usize, mode: ExpansionMode) -> DiffOp3 {
    let form = first_order_form(Generator::coord(axis), mode);
    let mut inner = DiffOp3::multiply(CPoly3::constant(gauss_real(form.constant.clone())));
    for (k, m) in form.m_coeffs.iter().enumerate() {
        inner = inner.add(&DiffOp3::euler(k).scale(&gauss_real(m.clone())));
    }
    DiffOp3::identity().add(&inner.mul_left(&CPoly3::i_theta()))
}

/// First-order operator form of a generator: `X_j ≈ x_j F_j`, `∂_{X_j} ≈ F_j ∂_j`.
pub fn first_order_operator(g: Generator, mode: ExpansionMode) -> DiffOp3 {
    let j = g.axis();
    let f = first_order_factor(j, mode);
    if g.is_coord() {
        f.mul_left(&CPoly3::var(j))
    } else {
        f.compose(&DiffOp3::partial(j))
    }
}

/// Action of a first-order generator on the ground state.
pub fn first_order_action(g: Generator, mode: ExpansionMode) -> GaussianPoly {
    first_order_operator(g, mode).apply(&GaussianPoly::ground())
}

/// `½ Σ_j (−∂_{X_j}∂_{X_j} + X_j X_j)` with operator forms composed exactly.
pub fn hamiltonian_operator(mode: ExpansionMode) -> DiffOp3 {
    let mut h = DiffOp3::zero();
    for j in 0..3 {
        let d = first_order_operator(Generator::deriv(j), mode);
        let x = first_order_operator(Generator::coord(j), mode);
        h = h.sub(&d.compose(&d)).add(&x.compose(&x));
    }
    h.scale(&gauss_real(rat(1, 2)))
}

/// Ground-state corrections `(u_j, w_j)` with `∂_{X_j}Ψ = (∂_j + u_j)Ψ` and
/// `X_jΨ = (x_j + w_j)Ψ`.
pub fn ground_corrections(mode: ExpansionMode) -> ([CPoly3; 3], [CPoly3; 3]) {
    let ground = GaussianPoly::ground();
    let u = std::array::from_fn(|j| {
        first_order_action(Generator::deriv(j), mode)
            .p
            .sub(&ground.deriv(j).p)
    });
    let w = std::array::from_fn(|j| {
        first_order_action(Generator::coord(j), mode)
            .p
            .sub(&CPoly3::var(j))
    });
    (u, w)
}

/// `½ Σ_j (−(∂_j + u_j)² + (x_j + w_j)²)`.
pub fn replacement_operator(mode: ExpansionMode) -> DiffOp3 {
    let (u, w) = ground_corrections(mode);
    let mut h = DiffOp3::zero();
    for j in 0..3 {
        let d = DiffOp3::partial(j).add(&DiffOp3::multiply(u[j].clone()));
        let x = DiffOp3::multiply(CPoly3::var(j).add(&w[j]));
        h = h.sub(&d.compose(&d)).add(&x.compose(&x));
    }
    h.scale(&gauss_real(rat(1, 2)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveHamiltonian {
    pub mode: ExpansionMode,
    pub a: [CPoly3; 3],
    pub v_r: CPoly3,
    pub v_i: CPoly3,
    /// `op − (½Σ(p − A)² + V_R + iV_I)`; zero when the pattern fits.
    pub residual: DiffOp3,
}

impl EffectiveHamiltonian {
    /// `½Σ(p − A)² + V_R + iV_I` to first order, `p = −i∂`.
    pub fn operator(&self) -> DiffOp3 {
        effective_operator(&self.a, &self.v_r, &self.v_i)
    }
}

pub fn effective_operator(a: &[CPoly3; 3], v_r: &CPoly3, v_i: &CPoly3) -> DiffOp3 {
    let i = gauss_i();
    let mut op = DiffOp3::multiply(v_r.add(&v_i.scale(&i)));
    op = op.add(&DiffOp3::multiply(
        divergence(a).scale(&gauss(rat(0, 1), rat(1, 2))),
    ));
    for j in 0..3 {
        let mut dd = [0; 3];
        dd[j] = 2;
        op = op.add(&DiffOp3::term(CPoly3::constant(gauss_real(rat(-1, 2))), dd));
        op = op.add(&DiffOp3::term(a[j].scale(&i), unit(j)));
    }
    op
}

/// Matches `op` to `½Σ(p − A)² + V_R + iV_I` at first order.
///
/// `A_j` is read from the `∂_j` coefficient (`iA_j`); the zero-derivative
/// part minus `(i/2)∇·A` splits into real and imaginary parts. Anything the
/// pattern cannot absorb stays in `residual`.
pub fn extract_effective(op: &DiffOp3, mode: ExpansionMode) -> EffectiveHamiltonian {
    let minus_i = gauss_int(0, -1);
    let a_full: [CPoly3; 3] = std::array::from_fn(|j| op.coeff(unit(j)).scale(&minus_i));
    let a: [CPoly3; 3] = std::array::from_fn(|j| a_full[j].real_part());
    let scalar = op
        .coeff([0, 0, 0])
        .sub(&divergence(&a).scale(&gauss(rat(0, 1), rat(1, 2))));
    let v_r = scalar.real_part();
    let v_i = scalar.imag_part();
    let residual = op.sub(&effective_operator(&a, &v_r, &v_i));
    EffectiveHamiltonian {
        mode,
        a,
        v_r,
        v_i,
        residual,
    }
}

/// Decomposition from the ground-state replacement route.
pub fn assemble_effective(mode: ExpansionMode) -> EffectiveHamiltonian {
    extract_effective(&replacement_operator(mode), mode)
}

pub fn gradient(p: &CPoly3) -> [CPoly3; 3] {
    std::array::from_fn(|j| p.deriv(j))
}

pub fn divergence(a: &[CPoly3; 3]) -> CPoly3 {
    a[0].deriv(0).add(&a[1].deriv(1)).add(&a[2].deriv(2))
}

pub fn curl(a: &[CPoly3; 3]) -> [CPoly3; 3] {
    [
        a[2].deriv(1).sub(&a[1].deriv(2)),
        a[0].deriv(2).sub(&a[2].deriv(0)),
        a[1].deriv(0).sub(&a[0].deriv(1)),
    ]
}

/// `⟨Ψ|op|Ψ⟩` for the unit-norm ground state, split by θ order.
pub fn ground_expectation(op: &DiffOp3) -> [GaussRat; 2] {
    op.apply(&GaussianPoly::ground()).p.gaussian_moment()
}

/// Closed forms as published, kept verbatim for comparison.
pub mod reference {
    use super::*;

    fn r(n: i64, d: i64) -> GaussRat {
        gauss_real(rat(n, d))
    }

    /// `f_x = x(½x² + y² + z² − 1)`, `f_y = y(½y² + z² − 1)`, `f_z = z(½z² − 1)`.
    fn f(axis: usize) -> CPoly3 {
        match axis {
            0 => CPoly3::from_terms(
                0,
                &[
                    ([3, 0, 0], r(1, 2)),
                    ([1, 2, 0], r(1, 1)),
                    ([1, 0, 2], r(1, 1)),
                    ([1, 0, 0], r(-1, 1)),
                ],
            ),
            1 => CPoly3::from_terms(
                0,
                &[
                    ([0, 3, 0], r(1, 2)),
                    ([0, 1, 2], r(1, 1)),
                    ([0, 1, 0], r(-1, 1)),
                ],
            ),
            _ => CPoly3::from_terms(0, &[([0, 0, 3], r(1, 2)), ([0, 0, 1], r(-1, 1))]),
        }
    }

    /// `h_x = x(½(x² − 1) + y² + z²)`, `h_y = y(½(y² − 1) + z²)`, `h_z = z(½(z² − 1))`.
    fn h(axis: usize) -> CPoly3 {
        match axis {
            0 => CPoly3::from_terms(
                0,
                &[
                    ([3, 0, 0], r(1, 2)),
                    ([1, 0, 0], r(-1, 2)),
                    ([1, 2, 0], r(1, 1)),
                    ([1, 0, 2], r(1, 1)),
                ],
            ),
            1 => CPoly3::from_terms(
                0,
                &[
                    ([0, 3, 0], r(1, 2)),
                    ([0, 1, 0], r(-1, 2)),
                    ([0, 1, 2], r(1, 1)),
                ],
            ),
            _ => CPoly3::from_terms(0, &[([0, 0, 3], r(1, 2)), ([0, 0, 1], r(-1, 2))]),
        }
    }

    /// Ground-state actions: `∂_{X_j}Ψ ≈ ∂_jΨ + iθ f_jΨ`, `X_jΨ ≈ x_jΨ − iθ h_jΨ`.
    pub fn ground_action(g: Generator) -> GaussianPoly {
        let j = g.axis();
        let i_theta = CPoly3::i_theta();
        let p = if g.is_coord() {
            CPoly3::var(j).sub(&i_theta.mul(&h(j)))
        } else {
            GaussianPoly::ground().deriv(j).p.add(&i_theta.mul(&f(j)))
        };
        GaussianPoly::new(p)
    }

    /// `A_j = θ f_j`.
    pub fn vector_potential() -> [CPoly3; 3] {
        std::array::from_fn(|j| CPoly3::theta().mul(&f(j)))
    }

    /// `V_I = −θ[(x³ + y³ + z³) + (xy² + xz² + yz²) + (x + y + z)]`.
    pub fn imaginary_potential() -> CPoly3 {
        let one = r(1, 1);
        CPoly3::from_terms(
            1,
            &[
                ([3, 0, 0], one.clone()),
                ([0, 3, 0], one.clone()),
                ([0, 0, 3], one.clone()),
                ([1, 2, 0], one.clone()),
                ([1, 0, 2], one.clone()),
                ([0, 1, 2], one.clone()),
                ([1, 0, 0], one.clone()),
                ([0, 1, 0], one.clone()),
                ([0, 0, 1], one),
            ],
        )
        .neg()
    }

    /// Componentwise field as printed: `B_x = −2θyz`, `B_y = 2θxz`, `B_z = −2θyz`.
    pub fn magnetic_field() -> [CPoly3; 3] {
        [
            CPoly3::term([0, 1, 1], 1, r(-2, 1)),
            CPoly3::term([1, 0, 1], 1, r(2, 1)),
            CPoly3::term([0, 1, 1], 1, r(-2, 1)),
        ]
    }

    /// `B_i = ε_{ijk} 2θ x_j x_k` with `j, k` summed.
    pub fn epsilon_summed() -> [CPoly3; 3] {
        std::array::from_fn(|i| {
            let mut b = CPoly3::zero();
            for j in 0..3 {
                for k in 0..3 {
                    let eps = levi_civita(i, j, k);
                    if eps != 0 {
                        let mut e = [0; 3];
                        e[j] += 1;
                        e[k] += 1;
                        b = b.add(&CPoly3::term(e, 1, r(2 * eps, 1)));
                    }
                }
            }
            b
        })
    }

    /// `B_i = ε_{ijk} 2θ x_j x_k` with `(i, j, k)` a fixed cyclic triple.
    pub fn epsilon_cyclic() -> [CPoly3; 3] {
        std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let mut e = [0; 3];
            e[j] += 1;
            e[k] += 1;
            CPoly3::term(e, 1, r(2, 1))
        })
    }

    pub(super) fn levi_civita(i: usize, j: usize, k: usize) -> i64 {
        if i == j || j == k || i == k {
            0
        } else if (j + 3 - i) % 3 == 1 {
            1
        } else {
            -1
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentDiff {
    pub computed: CPoly3,
    pub reference: CPoly3,
    /// `computed − reference`.
    pub diff: CPoly3,
    pub matches: bool,
    pub matches_negated: bool,
}

impl ComponentDiff {
    fn new(computed: CPoly3, reference: CPoly3) -> Self {
        let diff = computed.sub(&reference);
        let matches = diff.is_zero();
        let matches_negated = computed.add(&reference).is_zero() && !reference.is_zero();
        Self {
            computed,
            reference,
            diff,
            matches,
            matches_negated,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonCheck {
    pub summed: [CPoly3; 3],
    pub summed_vanishes: bool,
    pub cyclic: [CPoly3; 3],
    /// Per component: cyclic reading equals the componentwise printed field.
    pub cyclic_vs_printed: [bool; 3],
    /// Per component: cyclic reading equals the curl of the reference potential.
    pub cyclic_vs_curl: [bool; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyReport {
    pub mode: ExpansionMode,
    pub vector_potential: [ComponentDiff; 3],
    pub imaginary_potential: ComponentDiff,
    pub computed_v_i_even: bool,
    pub reference_v_i_odd: bool,
    /// Curl of the reference potential against the printed field.
    pub field_of_reference_a: [ComponentDiff; 3],
    /// Curl of the computed potential against the printed field.
    pub field_of_computed_a: [ComponentDiff; 3],
    pub divergence_free: bool,
    pub epsilon: EpsilonCheck,
    pub extraction_residual_zero: bool,
}

pub fn compare_to_reference(eff: &EffectiveHamiltonian) -> DiscrepancyReport {
    let ref_a = reference::vector_potential();
    let printed_b = reference::magnetic_field();
    let b_ref = curl(&ref_a);
    let b_comp = curl(&eff.a);
    let ref_v_i = reference::imaginary_potential();
    let summed = reference::epsilon_summed();
    let cyclic = reference::epsilon_cyclic();
    DiscrepancyReport {
        mode: eff.mode,
        vector_potential: std::array::from_fn(|j| {
            ComponentDiff::new(eff.a[j].clone(), ref_a[j].clone())
        }),
        imaginary_potential: ComponentDiff::new(eff.v_i.clone(), ref_v_i.clone()),
        computed_v_i_even: eff.v_i.is_even(),
        reference_v_i_odd: ref_v_i.is_odd(),
        field_of_reference_a: std::array::from_fn(|j| {
            ComponentDiff::new(b_ref[j].clone(), printed_b[j].clone())
        }),
        field_of_computed_a: std::array::from_fn(|j| {
            ComponentDiff::new(b_comp[j].clone(), printed_b[j].clone())
        }),
        divergence_free: divergence(&b_ref).is_zero() && divergence(&b_comp).is_zero(),
        epsilon: EpsilonCheck {
            summed_vanishes: summed.iter().all(CPoly3::is_zero),
            cyclic_vs_printed: std::array::from_fn(|j| cyclic[j] == printed_b[j]),
            cyclic_vs_curl: std::array::from_fn(|j| cyclic[j] == b_ref[j]),
            summed,
            cyclic,
        },
        extraction_residual_zero: eff.residual.is_zero(),
    }
}
