//! Truncated Fock-basis matrices of the first-order Hamiltonians.
//!
//! States `|n₁,n₂,n₃⟩` with every `n_j ≤ N_max` are indexed
//! `n₁(N+1)² + n₂(N+1) + n₃`. A [`DiffOp3`] term `c x^a y^b z^c ∂^α` becomes
//! the Kronecker product of per-mode factors `x^{a}∂^{α₁}` etc. Each factor is
//! multiplied out at cutoff `N_max + a + α₁` and only then cropped, so
//! matrix elements between states below the cutoff are exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundfx::{
    effective_operator, hamiltonian_operator, reference, replacement_operator, CPoly3, DiffOp3,
};
use crate::realize::{ExpansionMode, MultiIndex};
use crate::scalar::gauss_to_c64;

/// States this close to the cutoff are excluded from coupling scans.
pub const INTERIOR_MARGIN: u32 = 4;
pub const COUPLING_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    n_max: u32,
}

impl FockBasis {
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter("N_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn side(&self) -> usize {
        self.n_max as usize + 1
    }

    pub fn dim(&self) -> usize {
        self.side().pow(3)
    }

    pub fn index(&self, n: &MultiIndex) -> Option<usize> {
        if n.0.iter().any(|&k| k > self.n_max) {
            return None;
        }
        let s = self.side();
        Some(n.0[0] as usize * s * s + n.0[1] as usize * s + n.0[2] as usize)
    }

    pub fn state(&self, i: usize) -> MultiIndex {
        let s = self.side();
        MultiIndex::new((i / (s * s)) as u32, ((i / s) % s) as u32, (i % s) as u32)
    }

    pub fn states(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.dim()).map(|i| self.state(i))
    }

    /// Every `n_j ≤ N_max − margin`.
    pub fn is_interior(&self, n: &MultiIndex, margin: u32) -> bool {
        n.0.iter().all(|&k| k + margin <= self.n_max)
    }

    /// Some `n_j = N_max`.
    pub fn is_edge(&self, n: &MultiIndex) -> bool {
        n.0.contains(&self.n_max)
    }
}

/// Single-mode position and derivative matrices.
#[derive(Clone, Debug)]
pub struct LadderMatrices {
    pub n_max: u32,
    pub x: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// `⟨n−1|x|n⟩ = ⟨n|x|n−1⟩ = √(n/2)`, `⟨n−1|∂|n⟩ = √(n/2)`, `⟨n|∂|n−1⟩ = −√(n/2)`.
pub fn ladder_matrices(n_max: u32) -> Result<LadderMatrices> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("N_max must be at least 1".into()));
    }
    let s = n_max as usize + 1;
    let mut x = DMatrix::zeros(s, s);
    let mut d = DMatrix::zeros(s, s);
    for n in 1..s {
        let v = (n as f64 / 2.0).sqrt();
        x[(n - 1, n)] = v;
        x[(n, n - 1)] = v;
        d[(n - 1, n)] = v;
        d[(n, n - 1)] = -v;
    }
    Ok(LadderMatrices { n_max, x, d })
}

/// `x^a ∂^d` on one mode, built at cutoff `n_max + a + d` and cropped.
pub fn mode_factor(a: u32, d: u32, n_max: u32) -> DMatrix<f64> {
    let s = n_max as usize + 1;
    let big = n_max + a + d;
    let lad = ladder_matrices(big.max(1)).expect("cutoff ≥ 1");
    let mut m = DMatrix::<f64>::identity(big as usize + 1, big as usize + 1);
    for _ in 0..a {
        m = &lad.x * m;
    }
    for _ in 0..d {
        m *= &lad.d;
    }
    m.view((0, 0), (s, s)).into_owned()
}

/// Nonzero rows of each column, for banded products.
fn column_lists(m: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    (0..m.ncols())
        .map(|c| {
            (0..m.nrows())
                .filter(|&r| m[(r, c)] != 0.0)
                .map(|r| (r, m[(r, c)]))
                .collect()
        })
        .collect()
}

/// Matrix of `op` with the θ-order `k` coefficients weighted by `weights[k]`.
/// Nonzero `(row, value)` pairs of one column.
type Band = Vec<(usize, f64)>;

pub fn diffop_matrix(op: &DiffOp3, basis: FockBasis, weights: [f64; 2]) -> DMatrix<Complex64> {
    let dim = basis.dim();
    let side = basis.side();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut cache: HashMap<(u32, u32), Vec<Band>> = HashMap::new();
    for (alpha, coeff) in op.terms() {
        for (e, deg, c) in coeff.terms() {
            let w = weights[deg as usize];
            if w == 0.0 {
                continue;
            }
            let c = gauss_to_c64(c) * w;
            for k in 0..3 {
                cache
                    .entry((e[k], alpha[k]))
                    .or_insert_with(|| column_lists(&mode_factor(e[k], alpha[k], basis.n_max())));
            }
            let f0 = &cache[&(e[0], alpha[0])];
            let f1 = &cache[&(e[1], alpha[1])];
            let f2 = &cache[&(e[2], alpha[2])];
            for col in 0..dim {
                let n = basis.state(col);
                for &(m0, v0) in &f0[n.0[0] as usize] {
                    for &(m1, v1) in &f1[n.0[1] as usize] {
                        let base = (m0 * side + m1) * side;
                        let v01 = v0 * v1;
                        for &(m2, v2) in &f2[n.0[2] as usize] {
                            out[(base + m2, col)] += c * (v01 * v2);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Exact `⟨n|op|m⟩` at θ-order `order`, independent of any cutoff.
pub fn operator_element(op: &DiffOp3, order: u8, n: &MultiIndex, m: &MultiIndex) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (alpha, coeff) in op.terms() {
        for (e, deg, c) in coeff.terms() {
            if deg != order {
                continue;
            }
            let mut v = 1.0;
            for k in 0..3 {
                let cut = n.0[k].max(m.0[k]).max(1);
                v *= mode_factor(e[k], alpha[k], cut)[(n.0[k] as usize, m.0[k] as usize)];
                if v == 0.0 {
                    break;
                }
            }
            total += gauss_to_c64(c) * v;
        }
    }
    total
}

/// Which operator the Fock matrices represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianModel {
    /// First-order generators substituted into `½Σ(P² + X²)` and composed.
    Substituted,
    /// Ground-state replacement route, `½Σ(p − A)² + V_R + iV_I` as computed.
    Replacement,
    /// `½Σ(p − A)² + ½r² + iV_I` with the published `A` and `V_I`.
    Reference,
}

impl HamiltonianModel {
    pub const ALL: [HamiltonianModel; 3] = [
        HamiltonianModel::Substituted,
        HamiltonianModel::Replacement,
        HamiltonianModel::Reference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HamiltonianModel::Substituted => "substituted",
            HamiltonianModel::Replacement => "replacement",
            HamiltonianModel::Reference => "reference",
        }
    }

    pub fn operator(self, mode: ExpansionMode) -> DiffOp3 {
        match self {
            HamiltonianModel::Substituted => hamiltonian_operator(mode),
            HamiltonianModel::Replacement => replacement_operator(mode),
            HamiltonianModel::Reference => {
                let half_r2 = (0..3).fold(CPoly3::zero(), |acc, j| {
                    acc.add(&CPoly3::var(j).mul(&CPoly3::var(j)).scale_rat(1, 2))
                });
                effective_operator(
                    &reference::vector_potential(),
                    &half_r2,
                    &reference::imaginary_potential(),
                )
            }
        }
    }
}

impl fmt::Display for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HamiltonianModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "substituted" => Ok(HamiltonianModel::Substituted),
            "replacement" => Ok(HamiltonianModel::Replacement),
            "reference" => Ok(HamiltonianModel::Reference),
            other => Err(Error::InvalidParameter(format!(
                "unknown Hamiltonian model `{other}` (expected substituted, replacement or reference)"
            ))),
        }
    }
}

/// `H = H₀ + θH₁` on a truncated basis.
#[derive(Clone, Debug)]
pub struct SplitHamiltonian {
    pub basis: FockBasis,
    pub mode: ExpansionMode,
    pub model: HamiltonianModel,
    pub operator: DiffOp3,
    pub h0: DMatrix<Complex64>,
    pub h1: DMatrix<Complex64>,
}

impl SplitHamiltonian {
    pub fn build(n_max: u32, mode: ExpansionMode, model: HamiltonianModel) -> Result<Self> {
        let basis = FockBasis::new(n_max)?;
        let operator = model.operator(mode);
        let h0 = diffop_matrix(&operator, basis, [1.0, 0.0]);
        let h1 = diffop_matrix(&operator, basis, [0.0, 1.0]);
        Ok(Self {
            basis,
            mode,
            model,
            operator,
            h0,
            h1,
        })
    }

    pub fn at(&self, theta: f64) -> FockOperator {
        FockOperator {
            basis: self.basis,
            theta,
            mode: self.mode,
            model: self.model,
            matrix: &self.h0 + &self.h1 * Complex64::new(theta, 0.0),
        }
    }

    /// `θ⟨n|H₁|n⟩`, refused near the cutoff.
    pub fn energy_shift(&self, n: &MultiIndex, theta: f64) -> Result<Complex64> {
        if !self.basis.is_interior(n, INTERIOR_MARGIN) {
            return Err(Error::NearCutoff {
                state: n.0,
                n_max: self.basis.n_max(),
                margin: INTERIOR_MARGIN,
            });
        }
        let i = self.basis.index(n).expect("interior state");
        Ok(self.h1[(i, i)] * theta)
    }
}

/// `H_eff = H₀ + θH₁` for the substituted Hamiltonian.
pub fn build_h_eff(n_max: u32, theta: f64, mode: ExpansionMode) -> Result<FockOperator> {
    Ok(SplitHamiltonian::build(n_max, mode, HamiltonianModel::Substituted)?.at(theta))
}

/// `θ⟨n|H₁|n⟩` evaluated without a cutoff.
pub fn energy_shift(
    n: &MultiIndex,
    theta: f64,
    mode: ExpansionMode,
    model: HamiltonianModel,
) -> Complex64 {
    operator_element(&model.operator(mode), 1, n, n) * theta
}

#[derive(Clone, Debug)]
pub struct FockOperator {
    pub basis: FockBasis,
    pub theta: f64,
    pub mode: ExpansionMode,
    pub model: HamiltonianModel,
    pub matrix: DMatrix<Complex64>,
}

/// `(H + H†)/2`.
pub fn hermitian_part(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `H_I` with `H = H_R + iH_I`, i.e. `(H − H†)/(2i)`.
pub fn anti_hermitian_generator(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (h - h.adjoint()) * Complex64::new(0.0, -0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub dimension: usize,
    pub n_max: u32,
    pub theta: f64,
    pub mode: ExpansionMode,
    pub model: HamiltonianModel,
}

impl FockOperator {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn element(&self, n: &MultiIndex, m: &MultiIndex) -> Option<Complex64> {
        Some(self.matrix[(self.basis.index(n)?, self.basis.index(m)?)])
    }

    pub fn hermitian_part(&self) -> DMatrix<Complex64> {
        hermitian_part(&self.matrix)
    }

    pub fn anti_hermitian_generator(&self) -> DMatrix<Complex64> {
        anti_hermitian_generator(&self.matrix)
    }

    pub fn header(&self) -> MatrixHeader {
        MatrixHeader {
            dimension: self.dim(),
            n_max: self.basis.n_max(),
            theta: self.theta,
            mode: self.mode,
            model: self.model,
        }
    }

    /// `u64` LE header length, JSON header, then row-major `(re, im)` f64 LE.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::to_vec(&self.header()).map_err(std::io::Error::other)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let n = self.dim();
        let mut buf = Vec::with_capacity(n * 16);
        for r in 0..n {
            buf.clear();
            for c in 0..n {
                let z = self.matrix[(r, c)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<FockOperator> {
        let io = |e| Error::io("<matrix stream>", e);
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header).map_err(io)?;
        let header: MatrixHeader = serde_json::from_slice(&header)?;
        let basis = FockBasis::new(header.n_max)?;
        if basis.dim() != header.dimension {
            return Err(Error::Dimension(format!(
                "header dimension {} does not match N_max = {}",
                header.dimension, header.n_max
            )));
        }
        let n = header.dimension;
        let mut data = vec![0u8; n * n * 16];
        r.read_exact(&mut data).map_err(io)?;
        let f = |k: usize| f64::from_le_bytes(data[k..k + 8].try_into().expect("8 bytes"));
        let matrix = DMatrix::from_fn(n, n, |row, col| {
            let k = (row * n + col) * 16;
            Complex64::new(f(k), f(k + 8))
        });
        Ok(FockOperator {
            basis,
            theta: header.theta,
            mode: header.mode,
            model: header.model,
            matrix,
        })
    }

    /// Nonzero entries with provenance columns.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "mode", "model", "theta", "n_max", "row_n1", "row_n2", "row_n3", "col_n1", "col_n2",
            "col_n3", "re", "im",
        ])?;
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                let z = self.matrix[(r, c)];
                if z.norm() <= COUPLING_TOL {
                    continue;
                }
                let (a, b) = (self.basis.state(r), self.basis.state(c));
                out.write_record([
                    self.mode.to_string(),
                    self.model.to_string(),
                    self.theta.to_string(),
                    self.basis.n_max().to_string(),
                    a.0[0].to_string(),
                    a.0[1].to_string(),
                    a.0[2].to_string(),
                    b.0[0].to_string(),
                    b.0[1].to_string(),
                    b.0[2].to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub type Offset = [i32; 3];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffsetStats {
    pub offset: Offset,
    pub count: usize,
    pub max_abs: f64,
    /// `Σ |⟨m|H₁|n⟩|²` over interior columns.
    pub weight: f64,
    pub in_conjecture: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureVerdict {
    /// Every observed offset has all components in `{−1, 0, 1}`.
    pub contained: bool,
    pub inside_weight: f64,
    pub outside_weight: f64,
    pub outside_fraction: f64,
    pub outside_offsets: Vec<Offset>,
    pub missing_offsets: Vec<Offset>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparsityPattern {
    pub n_max: u32,
    pub tolerance: f64,
    pub margin: u32,
    pub offsets: Vec<OffsetStats>,
    pub verdict: ConjectureVerdict,
}

impl SparsityPattern {
    pub fn offset_set(&self) -> BTreeSet<Offset> {
        self.offsets.iter().map(|o| o.offset).collect()
    }
}

fn in_conjecture(o: &Offset) -> bool {
    o.iter().all(|d| d.abs() <= 1)
}

/// Offsets `m − n` with `|⟨m|H|n⟩| > tol`, scanned over columns `n` with every
/// `n_j ≤ N_max − margin`.
pub fn sparsity_pattern(
    h: &DMatrix<Complex64>,
    basis: FockBasis,
    tol: f64,
    margin: u32,
) -> SparsityPattern {
    let mut stats: BTreeMap<Offset, (usize, f64, f64)> = BTreeMap::new();
    for col in 0..basis.dim() {
        let n = basis.state(col);
        if !basis.is_interior(&n, margin) {
            continue;
        }
        for row in 0..basis.dim() {
            let v = h[(row, col)].norm();
            if v <= tol {
                continue;
            }
            let m = basis.state(row);
            let off = [0, 1, 2].map(|k| m.0[k] as i32 - n.0[k] as i32);
            let e = stats.entry(off).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 = e.1.max(v);
            e.2 += v * v;
        }
    }
    let offsets: Vec<OffsetStats> = stats
        .into_iter()
        .map(|(offset, (count, max_abs, weight))| OffsetStats {
            offset,
            count,
            max_abs,
            weight,
            in_conjecture: in_conjecture(&offset),
        })
        .collect();
    let inside_weight: f64 = offsets
        .iter()
        .filter(|o| o.in_conjecture)
        .map(|o| o.weight)
        .sum();
    let outside_weight: f64 = offsets
        .iter()
        .filter(|o| !o.in_conjecture)
        .map(|o| o.weight)
        .sum();
    let total = inside_weight + outside_weight;
    let observed: BTreeSet<Offset> = offsets.iter().map(|o| o.offset).collect();
    let mut missing = Vec::new();
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                if !observed.contains(&[a, b, c]) {
                    missing.push([a, b, c]);
                }
            }
        }
    }
    let outside_offsets: Vec<Offset> = offsets
        .iter()
        .filter(|o| !o.in_conjecture)
        .map(|o| o.offset)
        .collect();
    SparsityPattern {
        n_max: basis.n_max(),
        tolerance: tol,
        margin,
        verdict: ConjectureVerdict {
            contained: outside_offsets.is_empty(),
            inside_weight,
            outside_weight,
            outside_fraction: if total > 0.0 {
                outside_weight / total
            } else {
                0.0
            },
            outside_offsets,
            missing_offsets: missing,
        },
        offsets,
    }
}

/// Amplitudes `⟨m|H|n⟩` above `tol` for a fixed source state.
pub fn couplings_from(
    h: &DMatrix<Complex64>,
    basis: FockBasis,
    n: &MultiIndex,
    tol: f64,
) -> Vec<(MultiIndex, Complex64)> {
    let Some(col) = basis.index(n) else {
        return Vec::new();
    };
    (0..basis.dim())
        .filter(|&r| h[(r, col)].norm() > tol)
        .map(|r| (basis.state(r), h[(r, col)]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParityReport {
    /// Per-mode parity changes `(a_j + α_j) mod 2` generated by the operator terms.
    pub allowed: BTreeSet<[u8; 3]>,
    /// Per-mode parity changes of the nonzero couplings.
    pub observed: BTreeSet<[u8; 3]>,
    /// Total-parity changes observed (0 = preserved, 1 = flipped).
    pub total_parity_changes: BTreeSet<u8>,
    pub consistent: bool,
}

pub fn parity_consistency(
    op: &DiffOp3,
    order: u8,
    h: &DMatrix<Complex64>,
    basis: FockBasis,
    tol: f64,
) -> ParityReport {
    let mut allowed = BTreeSet::new();
    for (alpha, coeff) in op.terms() {
        for (e, deg, _) in coeff.terms() {
            if deg == order {
                allowed.insert([0, 1, 2].map(|k| ((e[k] + alpha[k]) % 2) as u8));
            }
        }
    }
    let mut observed = BTreeSet::new();
    for col in 0..basis.dim() {
        for row in 0..basis.dim() {
            if h[(row, col)].norm() > tol {
                let (m, n) = (basis.state(row), basis.state(col));
                observed.insert([0, 1, 2].map(|k| ((m.0[k] + n.0[k]) % 2) as u8));
            }
        }
    }
    let total_parity_changes = observed.iter().map(|p| p.iter().sum::<u8>() % 2).collect();
    ParityReport {
        consistent: observed.is_subset(&allowed),
        allowed,
        observed,
        total_parity_changes,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub row: MultiIndex,
    pub col: MultiIndex,
    /// `(re, im)` per cutoff.
    pub values: Vec<[f64; 2]>,
    /// Largest successive difference.
    pub max_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub cutoffs: Vec<u32>,
    pub rows: Vec<ConvergenceRow>,
    pub sparsity_stable: bool,
}

/// `⟨row|H₁|col⟩` across increasing cutoffs, plus offset-set stability.
pub fn cutoff_convergence(
    elements: &[(MultiIndex, MultiIndex)],
    cutoffs: &[u32],
    mode: ExpansionMode,
    model: HamiltonianModel,
) -> Result<ConvergenceTable> {
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) || cutoffs.is_empty() {
        return Err(Error::InvalidParameter(
            "cutoffs must be nonempty and strictly increasing".into(),
        ));
    }
    let splits = cutoffs
        .iter()
        .map(|&n| SplitHamiltonian::build(n, mode, model))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (r, c) in elements {
        let values: Vec<[f64; 2]> = splits
            .iter()
            .map(|s| {
                let (i, j) = (s.basis.index(r), s.basis.index(c));
                match (i, j) {
                    (Some(i), Some(j)) => [s.h1[(i, j)].re, s.h1[(i, j)].im],
                    _ => [f64::NAN, f64::NAN],
                }
            })
            .collect();
        let max_step = values
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            row: *r,
            col: *c,
            values,
            max_step,
        });
    }
    let sets: Vec<BTreeSet<Offset>> = splits
        .iter()
        .map(|s| sparsity_pattern(&s.h1, s.basis, COUPLING_TOL, INTERIOR_MARGIN).offset_set())
        .collect();
    Ok(ConvergenceTable {
        cutoffs: cutoffs.to_vec(),
        rows,
        sparsity_stable: sets.windows(2).all(|w| w[0] == w[1]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellShift {
    pub quanta: u32,
    pub unperturbed: f64,
    pub degeneracy: usize,
    /// Eigenvalues of `θH₁` restricted to the shell, sorted by `(re, im)`.
    pub shifts: Vec<[f64; 2]>,
}

/// First-order degenerate shifts of the shells `n₁ + n₂ + n₃ = k` for
/// `k ≤ N_max − margin`.
pub fn shell_shifts(split: &SplitHamiltonian, theta: f64, margin: u32) -> Vec<ShellShift> {
    let top = split.basis.n_max().saturating_sub(margin);
    (0..=top)
        .map(|k| {
            let idx: Vec<usize> = split
                .basis
                .states()
                .enumerate()
                .filter(|(_, n)| n.total() == k)
                .map(|(i, _)| i)
                .collect();
            let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
                split.h1[(idx[r], idx[c])] * theta
            });
            let mut shifts: Vec<[f64; 2]> =
                eigenvalues(&block).iter().map(|z| [z.re, z.im]).collect();
            shifts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            ShellShift {
                quanta: k,
                unperturbed: f64::from(k) + 1.5,
                degeneracy: idx.len(),
                shifts,
            }
        })
        .collect()
}

/// Eigenvalues of a general complex matrix (complex Schur form).
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let schur = m.clone().schur();
    schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| {
            let (_, t) = schur.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_index_round_trip() {
        let b = FockBasis::new(3).unwrap();
        assert_eq!(b.dim(), 64);
        for i in 0..b.dim() {
            assert_eq!(b.index(&b.state(i)), Some(i));
        }
        assert_eq!(b.index(&MultiIndex::new(4, 0, 0)), None);
        assert!(FockBasis::new(0).is_err());
    }

    #[test]
    fn ladder_elements() {
        let l = ladder_matrices(4).unwrap();
        assert!((l.x[(0, 1)] - 0.5f64.sqrt()).abs() < 1e-16);
        assert_eq!(l.x, l.x.transpose());
        let comm = &l.d * &l.x - &l.x * &l.d;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cropped_square_is_exact() {
        // x² has ⟨N|x²|N⟩ = N + ½ only when built past the cutoff
        let m = mode_factor(2, 0, 3);
        assert!((m[(3, 3)] - 3.5).abs() < 1e-14);
        let h = mode_factor(2, 0, 3) * 0.5 - mode_factor(0, 2, 3) * 0.5;
        for n in 0..4 {
            assert!((h[(n, n)] - (n as f64 + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn model_parsing() {
        for m in HamiltonianModel::ALL {
            assert_eq!(m.as_str().parse::<HamiltonianModel>().unwrap(), m);
        }
        assert!("other".parse::<HamiltonianModel>().is_err());
    }
}
