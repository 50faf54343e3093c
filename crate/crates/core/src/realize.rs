//! Concrete realization of `A_q(3)` on polynomials in `(x, y, z)` with
//! `q = e^{iθ}`, `θ` real:
//!
//! ```text
//! X_j  = x_j β_j q^{M_{k>j}}        ∂_{X_j} = q^{M_{k>j}} β_j ∂_{x_j}
//! β_j  = { (q^{2(M_j+1)} − 1) / ((q² − 1)(M_j + 1)) }^{1/2}
//! ```
//!
//! with `M_j = x_j ∂_{x_j}` and `M_{k>j} = Σ_{k>j} M_k`. Every operator is
//! diagonal-then-shift on monomials, so the action is exact on the monomial
//! basis. The module also carries the two first-order expansions in `θ`
//! (the published one and a rederived one) and the residual-order scan
//! that tells them apart.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::qsym::{defining_relations, normalize, NCWord, Relation};
use crate::scalar::{rat, Rational};

pub const DEFAULT_PRUNE: f64 = 1e-15;

/// Monomial exponents `(n₁, n₂, n₃)` of `x^{n₁} y^{n₂} z^{n₃}`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct MultiIndex(pub [u32; 3]);

impl MultiIndex {
    pub fn new(n1: u32, n2: u32, n3: u32) -> Self {
        Self([n1, n2, n3])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `Σ_{k>j} n_k`.
    pub fn tail_sum(&self, axis: usize) -> u32 {
        self.0[axis + 1..].iter().sum()
    }

    pub fn raised(&self, axis: usize) -> Self {
        let mut n = self.0;
        n[axis] += 1;
        Self(n)
    }

    pub fn lowered(&self, axis: usize) -> Option<Self> {
        let mut n = self.0;
        n[axis] = n[axis].checked_sub(1)?;
        Some(Self(n))
    }

    /// All multi-indices of total degree `≤ degree`.
    pub fn up_to_degree(degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    out.push(MultiIndex::new(a, b, c));
                }
            }
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected (n1,n2,n3), got `{s}`")));
        }
        let mut n = [0u32; 3];
        for (slot, p) in n.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent `{p}` in `{s}`")))?;
        }
        Ok(Self(n))
    }
}

/// Real deformation angle; `q = e^{iθ}`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Theta(pub f64);

impl Theta {
    pub fn q(self) -> Complex64 {
        Complex64::from_polar(1.0, self.0)
    }

    /// `q^m`, exactly unit-modulus for real `θ`.
    pub fn q_pow(self, m: i64) -> Complex64 {
        Complex64::from_polar(1.0, self.0 * m as f64)
    }
}

/// Finitely supported vector over the monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialVec {
    coeffs: BTreeMap<MultiIndex, Complex64>,
    prune: f64,
}

impl Default for MonomialVec {
    fn default() -> Self {
        Self::with_prune(DEFAULT_PRUNE)
    }
}

impl MonomialVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coefficients with modulus below `prune` are dropped.
    pub fn with_prune(prune: f64) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            prune,
        }
    }

    pub fn monomial(n: MultiIndex) -> Self {
        let mut v = Self::new();
        v.add(n, Complex64::new(1.0, 0.0));
        v
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    fn empty_like(&self) -> Self {
        Self::with_prune(self.prune)
    }

    pub fn add(&mut self, n: MultiIndex, c: Complex64) {
        let entry = self.coeffs.entry(n).or_insert(Complex64::zero());
        *entry += c;
        if entry.norm() < self.prune {
            self.coeffs.remove(&n);
        }
    }

    pub fn get(&self, n: &MultiIndex) -> Complex64 {
        self.coeffs.get(n).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coeffs.iter()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.empty_like();
        for (n, v) in &self.coeffs {
            out.add(*n, v * c);
        }
        out
    }

    pub fn add_vec(&mut self, other: &MonomialVec) {
        for (n, v) in &other.coeffs {
            self.add(*n, *v);
        }
    }

    /// Difference without pruning, so tiny discrepancies stay visible.
    pub fn diff(&self, other: &MonomialVec) -> BTreeMap<MultiIndex, Complex64> {
        let mut out: BTreeMap<MultiIndex, Complex64> = self.coeffs.clone();
        for (n, v) in &other.coeffs {
            *out.entry(*n).or_insert(Complex64::zero()) -= v;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &MonomialVec) -> f64 {
        self.diff(other)
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn l2_diff(&self, other: &MonomialVec) -> f64 {
        self.diff(other)
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Serialize for MonomialVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, [f64; 2]> = self
            .coeffs
            .iter()
            .map(|(n, c)| (n.to_string(), [c.re, c.im]))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MonomialVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, [f64; 2]>::deserialize(deserializer)?;
        let mut v = MonomialVec::new();
        for (k, [re, im]) in map {
            let n: MultiIndex = k.parse().map_err(D::Error::custom)?;
            v.add(n, Complex64::new(re, im));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaValue {
    pub value: Complex64,
    /// Set when `q² = 1` (θ ≡ 0 mod π); `value` is then the limit 1.
    pub removable_singularity: bool,
}

/// `β(n) = {(q^{2(n+1)} − 1)/((q² − 1)(n + 1))}^{1/2}`, principal branch.
///
/// The ratio is evaluated as the finite sum `(1/(n+1)) Σ_{k=0}^{n} q^{2k}`,
/// which equals it wherever `q² ≠ 1` and is the removable limit otherwise.
pub fn beta_exact(n: u32, theta: Theta) -> BetaValue {
    let q2 = theta.q_pow(2);
    let singular = (q2 - 1.0).norm() <= 4.0 * f64::EPSILON;
    if n == 0 {
        return BetaValue {
            value: Complex64::new(1.0, 0.0),
            removable_singularity: singular,
        };
    }
    let sum: Complex64 = (0..=n).map(|k| theta.q_pow(2 * i64::from(k))).sum();
    let ratio = sum / f64::from(n + 1);
    BetaValue {
        value: if singular {
            Complex64::new(1.0, 0.0)
        } else {
            ratio.sqrt()
        },
        removable_singularity: singular,
    }
}

fn beta(n: u32, theta: Theta) -> Complex64 {
    beta_exact(n, theta).value
}

/// Exact action of one generator of the realization.
pub fn apply_exact(g: Generator, v: &MonomialVec, theta: Theta) -> MonomialVec {
    let j = g.axis();
    let mut out = v.empty_like();
    for (n, c) in v.iter() {
        let phase = theta.q_pow(i64::from(n.tail_sum(j)));
        if g.is_coord() {
            out.add(n.raised(j), c * phase * beta(n.0[j], theta));
        } else if let Some(m) = n.lowered(j) {
            out.add(m, c * phase * beta(m.0[j], theta) * f64::from(n.0[j]));
        }
    }
    out
}

/// Applies a word, rightmost letter first.
pub fn apply_word_exact(word: &NCWord, v: &MonomialVec, theta: Theta) -> MonomialVec {
    word.letters()
        .iter()
        .rev()
        .fold(v.clone(), |acc, g| apply_exact(*g, &acc, theta))
}

fn apply_terms(terms: &[(NCWord, Complex64)], v: &MonomialVec, theta: Theta) -> MonomialVec {
    let mut out = MonomialVec::with_prune(0.0);
    for (w, c) in terms {
        out.add_vec(&apply_word_exact(w, v, theta).scaled(*c));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RelationResidual {
    pub name: String,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub theta: f64,
    pub degree: u32,
    pub per_relation: Vec<RelationResidual>,
    pub max_residual: f64,
}

/// Applies both sides of every defining relation to every monomial of total
/// degree `≤ degree` and records the largest coefficientwise discrepancy.
pub fn relation_residual_numeric(theta: Theta, degree: u32) -> Result<ResidualReport> {
    relation_residual_for(&defining_relations(), theta, degree)
}

pub fn relation_residual_for(
    relations: &[Relation],
    theta: Theta,
    degree: u32,
) -> Result<ResidualReport> {
    if degree < 2 {
        return Err(Error::InvalidParameter(format!(
            "degree cutoff must be at least 2, got {degree}"
        )));
    }
    let basis = MultiIndex::up_to_degree(degree);
    let mut per_relation = Vec::with_capacity(relations.len());
    for rel in relations {
        // Raw words as written; normal forms would hide the rewrite itself.
        let eval = |s: &crate::qsym::WordSum| -> Vec<(NCWord, Complex64)> {
            s.terms()
                .map(|(w, c)| (w.clone(), c.eval_theta(theta.0)))
                .collect()
        };
        let (lhs, rhs) = (eval(&rel.lhs), eval(&rel.rhs));
        let mut worst: f64 = 0.0;
        for n in &basis {
            let v = MonomialVec::monomial(*n);
            let a = apply_terms(&lhs, &v, theta);
            let b = apply_terms(&rhs, &v, theta);
            worst = worst.max(a.max_abs_diff(&b));
        }
        per_relation.push(RelationResidual {
            name: rel.name.clone(),
            max_residual: worst,
        });
    }
    let max_residual = per_relation
        .iter()
        .map(|r| r.max_residual)
        .fold(0.0, f64::max);
    Ok(ResidualReport {
        theta: theta.0,
        degree,
        per_relation,
        max_residual,
    })
}

/// Checks that the symbolic normal form and the raw relation agree in the
/// realization too (the realization respects normalization).
pub fn normal_form_residual(word: &NCWord, theta: Theta, degree: u32) -> f64 {
    let raw = vec![(word.clone(), Complex64::new(1.0, 0.0))];
    let nf = normalize(&crate::qsym::WordSum::from_word(
        word.clone(),
        crate::scalar::QScalar::one(),
    ))
    .eval_theta(theta.0);
    MultiIndex::up_to_degree(degree)
        .iter()
        .map(|n| {
            let v = MonomialVec::monomial(*n);
            apply_terms(&raw, &v, theta).max_abs_diff(&apply_terms(&nf, &v, theta))
        })
        .fold(0.0, f64::max)
}

/// Which first-order expansion of `β_j` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    /// `β_j ≈ 1 + ½iθ(M_j + 1)`, as published.
    Paper,
    /// `β_j ≈ 1 + ½iθ M_j`, from expanding numerator and denominator
    /// consistently (`β(n)² = (1/(n+1)) Σ_{k≤n} q^{2k} ≈ 1 + iθn`).
    Rederived,
}

impl ExpansionMode {
    pub const BOTH: [ExpansionMode; 2] = [ExpansionMode::Paper, ExpansionMode::Rederived];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpansionMode::Paper => "paper",
            ExpansionMode::Rederived => "rederived",
        }
    }
}

impl fmt::Display for ExpansionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpansionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(ExpansionMode::Paper),
            "rederived" => Ok(ExpansionMode::Rederived),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// First-order factor `F = 1 + iθ (constant + Σ_k m_k M_k)` with
/// `X_j ≈ x_j F` and `∂_{X_j} ≈ F ∂_{x_j}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirstOrderForm {
    pub constant: Rational,
    pub m_coeffs: [Rational; 3],
}

impl FirstOrderForm {
    /// `constant + Σ m_k n_k` at a monomial.
    pub fn weight(&self, n: &MultiIndex) -> f64 {
        let c = self.constant.to_f64().unwrap_or(f64::NAN);
        c + self
            .m_coeffs
            .iter()
            .zip(n.0)
            .map(|(m, nk)| m.to_f64().unwrap_or(f64::NAN) * f64::from(nk))
            .sum::<f64>()
    }
}

pub fn first_order_form(g: Generator, mode: ExpansionMode) -> FirstOrderForm {
    let j = g.axis();
    let half = rat(1, 2);
    let mut m_coeffs = [rat(0, 1), rat(0, 1), rat(0, 1)];
    m_coeffs[j] = half.clone();
    for m in m_coeffs.iter_mut().skip(j + 1) {
        *m = rat(1, 1);
    }
    let constant = match mode {
        ExpansionMode::Paper => half,
        ExpansionMode::Rederived => rat(0, 1),
    };
    FirstOrderForm { constant, m_coeffs }
}

/// First-order action: the factor `F` is applied to the monomial before the
/// shift for `X_j` and after it for `∂_{X_j}`.
pub fn apply_first_order(
    g: Generator,
    v: &MonomialVec,
    theta: Theta,
    mode: ExpansionMode,
) -> MonomialVec {
    let form = first_order_form(g, mode);
    let j = g.axis();
    let i_theta = Complex64::new(0.0, theta.0);
    let mut out = v.empty_like();
    for (n, c) in v.iter() {
        if g.is_coord() {
            let f = 1.0 + i_theta * form.weight(n);
            out.add(n.raised(j), c * f);
        } else if let Some(m) = n.lowered(j) {
            let f = 1.0 + i_theta * form.weight(&m);
            out.add(m, c * f * f64::from(n.0[j]));
        }
    }
    out
}

/// Log-spaced grid with `points` entries from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeFit {
    Slope {
        slope: f64,
        intercept: f64,
    },
    /// Every residual on the grid is exactly zero.
    ExactMatch,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanOutcome {
    pub generator: Generator,
    pub mode: ExpansionMode,
    /// `(θ, ‖apply_exact − apply_first_order‖₂)`.
    pub points: Vec<(f64, f64)>,
    pub fit: SlopeFit,
}

impl ScanOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self.fit {
            SlopeFit::Slope { slope, .. } => Some(slope),
            SlopeFit::ExactMatch => None,
        }
    }
}

/// Least-squares slope of `log residual` against `log θ`.
pub fn expansion_order_scan(
    g: Generator,
    v: &MonomialVec,
    grid: &[f64],
    mode: ExpansionMode,
) -> Result<ScanOutcome> {
    if grid.len() < 2 {
        return Err(Error::DegenerateGrid(format!("{} point(s)", grid.len())));
    }
    if grid.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::DegenerateGrid(
            "θ values must be positive and finite".into(),
        ));
    }
    let (lo, hi) = grid.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
        (lo.min(*t), hi.max(*t))
    });
    if hi / lo < 100.0 {
        return Err(Error::DegenerateGrid(format!(
            "grid spans {:.2} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    let points: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            let exact = apply_exact(g, v, Theta(t));
            let approx = apply_first_order(g, v, Theta(t), mode);
            (t, exact.l2_diff(&approx))
        })
        .collect();
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let fit = if usable.is_empty() {
        SlopeFit::ExactMatch
    } else if usable.len() < 2 {
        return Err(Error::DegenerateGrid(
            "fewer than two nonzero residuals to fit".into(),
        ));
    } else {
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        SlopeFit::Slope {
            slope,
            intercept: my - slope * mx,
        }
    };
    Ok(ScanOutcome {
        generator: g,
        mode,
        points,
        fit,
    })
}
