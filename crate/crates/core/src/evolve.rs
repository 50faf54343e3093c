//! Time evolution `iΨ′ = HΨ` under a non-Hermitian truncated Hamiltonian.
//!
//! The squared norm `P(t) = ⟨Ψ|Ψ⟩` is never renormalized; it obeys
//! `dP/dt = 2⟨Ψ|H_I|Ψ⟩` with `H = H_R + iH_I`.
//!
//! The exponential propagator is assembled per connected component of the
//! coupling graph of `H` (the parity sectors of a polynomial Hamiltonian),
//! each block via Padé scaling and squaring.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspec::{anti_hermitian_generator, FockBasis};
use crate::realize::MultiIndex;

pub const RK4_STEP_LIMIT: f64 = 0.1;
pub const EDGE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Expm,
    Rk4,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Expm => "expm",
            Method::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "expm" | "matrix-exponential" => Ok(Method::Expm),
            "rk4" | "fourth-order-explicit" => Ok(Method::Rk4),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected expm or rk4)"
            ))),
        }
    }
}

/// Connected components of the graph with an edge wherever `H_ij ≠ 0` or `H_ji ≠ 0`.
pub fn coupled_blocks(h: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for c in 0..n {
        for r in 0..n {
            if r != c && h[(r, c)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(i);
    }
    blocks
}

/// `exp(A)` assembled blockwise over the coupling components of `A`.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for block in coupled_blocks(a) {
        let sub = DMatrix::from_fn(block.len(), block.len(), |r, c| a[(block[r], block[c])]);
        let e = sub.exp();
        for (r, &gr) in block.iter().enumerate() {
            for (c, &gc) in block.iter().enumerate() {
                out[(gr, gc)] = e[(r, c)];
            }
        }
    }
    out
}

/// Compressed sparse rows, for repeated matrix–vector products.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for r in 0..n {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            n,
            row_start,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, x: &DVector<Complex64>, y: &mut DVector<Complex64>) {
        for r in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }
}

/// Per-step propagator.
enum Stepper {
    Blocks(Vec<(Vec<usize>, DMatrix<Complex64>)>),
    Rk4 { minus_i_h: Csr, dt: f64 },
}

impl Stepper {
    fn new(h: &DMatrix<Complex64>, dt: f64, method: Method) -> Result<Self> {
        let minus_i_h = h * Complex64::new(0.0, -1.0);
        match method {
            Method::Expm => {
                let a = &minus_i_h * Complex64::new(dt, 0.0);
                let blocks = coupled_blocks(&a)
                    .into_iter()
                    .map(|b| {
                        let sub = DMatrix::from_fn(b.len(), b.len(), |r, c| a[(b[r], b[c])]);
                        (b, sub.exp())
                    })
                    .collect();
                Ok(Stepper::Blocks(blocks))
            }
            Method::Rk4 => {
                let product = dt * spectral_bound(h);
                if product > RK4_STEP_LIMIT {
                    return Err(Error::StepSize {
                        product,
                        limit: RK4_STEP_LIMIT,
                    });
                }
                Ok(Stepper::Rk4 {
                    minus_i_h: Csr::from_dense(&minus_i_h),
                    dt,
                })
            }
        }
    }

    fn step(&self, psi: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            Stepper::Blocks(blocks) => {
                let mut out = DVector::zeros(psi.len());
                for (idx, u) in blocks {
                    let local = DVector::from_fn(idx.len(), |i, _| psi[idx[i]]);
                    let moved = u * local;
                    for (i, &g) in idx.iter().enumerate() {
                        out[g] = moved[i];
                    }
                }
                out
            }
            Stepper::Rk4 { minus_i_h, dt } => {
                let n = psi.len();
                let half = Complex64::new(dt / 2.0, 0.0);
                let full = Complex64::new(*dt, 0.0);
                let mut k1 = DVector::zeros(n);
                let mut k2 = DVector::zeros(n);
                let mut k3 = DVector::zeros(n);
                let mut k4 = DVector::zeros(n);
                minus_i_h.mul_vec(psi, &mut k1);
                minus_i_h.mul_vec(&(psi + &k1 * half), &mut k2);
                minus_i_h.mul_vec(&(psi + &k2 * half), &mut k3);
                minus_i_h.mul_vec(&(psi + &k3 * full), &mut k4);
                let two = Complex64::new(2.0, 0.0);
                psi + (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0)
            }
        }
    }
}

/// `√(‖H‖₁‖H‖_∞)`, an upper bound on the spectral norm.
pub fn spectral_bound(h: &DMatrix<Complex64>) -> f64 {
    let col = (0..h.ncols())
        .map(|c| h.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let row = (0..h.nrows())
        .map(|r| h.row(r).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    (col * row).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    /// Keep every `stride`-th state (the first and last are always kept).
    pub stride: usize,
    /// Stop once an edge state (some `n_j = N_max`) holds more than this.
    pub edge_threshold: Option<f64>,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            t_final: 5.0,
            dt: 1e-3,
            method: Method::Expm,
            stride: 10,
            edge_threshold: Some(EDGE_THRESHOLD),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeAbort {
    pub time: f64,
    pub state: MultiIndex,
    pub occupation: f64,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub state: DVector<Complex64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub basis: FockBasis,
    pub dt: f64,
    pub method: Method,
    /// `t_k = k·dt`.
    pub times: Vec<f64>,
    /// `P(t_k)`.
    pub norms: Vec<f64>,
    pub samples: Vec<Sample>,
    pub aborted: Option<EdgeAbort>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<Complex64> {
        &self
            .samples
            .last()
            .expect("at least the initial sample")
            .state
    }
}

/// Unit vector on a basis state.
pub fn basis_state(basis: FockBasis, n: &MultiIndex) -> Result<DVector<Complex64>> {
    let i = basis.index(n).ok_or_else(|| {
        Error::InvalidParameter(format!("state {n} outside N_max = {}", basis.n_max()))
    })?;
    let mut v = DVector::zeros(basis.dim());
    v[i] = Complex64::new(1.0, 0.0);
    Ok(v)
}

pub fn propagate(
    h: &DMatrix<Complex64>,
    basis: FockBasis,
    psi0: &DVector<Complex64>,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    if h.nrows() != basis.dim() || h.ncols() != basis.dim() || psi0.len() != basis.dim() {
        return Err(Error::Dimension(format!(
            "H is {}×{}, ψ₀ has {} entries, basis has {}",
            h.nrows(),
            h.ncols(),
            psi0.len(),
            basis.dim()
        )));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite() && opts.t_final >= 0.0 && opts.t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and T ≥ 0, got dt = {}, T = {}",
            opts.dt, opts.t_final
        )));
    }
    let p0 = psi0.norm_squared();
    if (p0 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "initial state has squared norm {p0}, expected 1"
        )));
    }
    let stride = opts.stride.max(1);
    let steps = (opts.t_final / opts.dt).round() as usize;
    let stepper = Stepper::new(h, opts.dt, opts.method)?;
    let edges: Vec<usize> = (0..basis.dim())
        .filter(|&i| basis.is_edge(&basis.state(i)))
        .collect();

    let mut psi = psi0.clone();
    let mut traj = Trajectory {
        basis,
        dt: opts.dt,
        method: opts.method,
        times: vec![0.0],
        norms: vec![p0],
        samples: vec![Sample {
            step: 0,
            time: 0.0,
            state: psi.clone(),
        }],
        aborted: None,
    };
    for k in 1..=steps {
        psi = stepper.step(&psi);
        let t = k as f64 * opts.dt;
        let p = psi.norm_squared();
        if !p.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        traj.times.push(t);
        traj.norms.push(p);
        let edge_hit = opts.edge_threshold.and_then(|limit| {
            edges
                .iter()
                .map(|&i| (i, psi[i].norm_sqr()))
                .filter(|(_, occ)| *occ > limit)
                .max_by(|a, b| a.1.total_cmp(&b.1))
        });
        if k % stride == 0 || k == steps || edge_hit.is_some() {
            traj.samples.push(Sample {
                step: k,
                time: t,
                state: psi.clone(),
            });
        }
        if let Some((i, occupation)) = edge_hit {
            let state = basis.state(i);
            warn!("edge state {state} reached occupation {occupation:.3e} at t = {t}; stopping");
            traj.aborted = Some(EdgeAbort {
                time: t,
                state,
                occupation,
            });
            break;
        }
    }
    Ok(traj)
}

/// `⟨ψ|A|ψ⟩` for Hermitian `A`, real part.
pub fn expectation(a: &DMatrix<Complex64>, psi: &DVector<Complex64>) -> f64 {
    psi.dotc(&(a * psi)).re
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormFlowPoint {
    pub time: f64,
    /// Centered difference of `P`.
    pub dp_dt: f64,
    /// `2⟨H_I⟩`.
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormFlowReport {
    pub points: Vec<NormFlowPoint>,
    pub max_deviation: f64,
}

/// Compares `dP/dt` (centered differences on the step grid) with `2⟨H_I⟩`
/// at every stored interior sample.
pub fn norm_flow_check(traj: &Trajectory, h: &DMatrix<Complex64>) -> Result<NormFlowReport> {
    if traj.norms.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            found: traj.norms.len(),
        });
    }
    let h_i = anti_hermitian_generator(h);
    let last = traj.norms.len() - 1;
    let points: Vec<NormFlowPoint> = traj
        .samples
        .iter()
        .filter(|s| s.step >= 1 && s.step < last)
        .map(|s| NormFlowPoint {
            time: s.time,
            dp_dt: (traj.norms[s.step + 1] - traj.norms[s.step - 1]) / (2.0 * traj.dt),
            predicted: 2.0 * expectation(&h_i, &s.state),
        })
        .collect();
    if points.is_empty() {
        return Err(Error::TooFewPoints {
            needed: 1,
            found: 0,
        });
    }
    let max_deviation = points
        .iter()
        .map(|p| (p.dp_dt - p.predicted).abs())
        .fold(0.0, f64::max);
    Ok(NormFlowReport {
        points,
        max_deviation,
    })
}

/// `dP/dt` at a state, `2⟨ψ|H_I|ψ⟩`.
pub fn norm_rate(h: &DMatrix<Complex64>, psi: &DVector<Complex64>) -> f64 {
    2.0 * expectation(&anti_hermitian_generator(h), psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Growth,
    Decay,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationSeries {
    pub state: MultiIndex,
    pub occupations: Vec<f64>,
    pub net_change: f64,
    pub trend: Trend,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainLossMap {
    pub times: Vec<f64>,
    pub series: Vec<OccupationSeries>,
}

/// `|⟨n|Ψ(t)⟩|²` at the stored samples; changes below `flat_tol` count as flat.
pub fn gain_loss_map(
    traj: &Trajectory,
    states: &[MultiIndex],
    flat_tol: f64,
) -> Result<GainLossMap> {
    let series = states
        .iter()
        .map(|n| {
            let i = traj
                .basis
                .index(n)
                .ok_or_else(|| Error::InvalidParameter(format!("state {n} outside the basis")))?;
            let occupations: Vec<f64> =
                traj.samples.iter().map(|s| s.state[i].norm_sqr()).collect();
            let net_change = occupations.last().copied().unwrap_or(0.0) - occupations[0];
            let trend = if net_change > flat_tol {
                Trend::Growth
            } else if net_change < -flat_tol {
                Trend::Decay
            } else {
                Trend::Flat
            };
            Ok(OccupationSeries {
                state: *n,
                occupations,
                net_change,
                trend,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainLossMap {
        times: traj.samples.iter().map(|s| s.time).collect(),
        series,
    })
}

/// Rows `t, P, ⟨H_I⟩, occupations…` at the stored samples, with provenance columns.
pub fn write_trajectory_csv<W: Write>(
    w: W,
    traj: &Trajectory,
    h: &DMatrix<Complex64>,
    states: &[MultiIndex],
    provenance: &[(&str, String)],
) -> Result<()> {
    let h_i = anti_hermitian_generator(h);
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = provenance.iter().map(|(k, _)| k.to_string()).collect();
    header.extend(["t".to_string(), "P".to_string(), "re_h_i".to_string()]);
    header.extend(
        states
            .iter()
            .map(|n| format!("occ_{}_{}_{}", n.0[0], n.0[1], n.0[2])),
    );
    out.write_record(&header)?;
    let idx: Vec<usize> = states.iter().filter_map(|n| traj.basis.index(n)).collect();
    for s in &traj.samples {
        let mut row: Vec<String> = provenance.iter().map(|(_, v)| v.clone()).collect();
        row.push(s.time.to_string());
        row.push(traj.norms[s.step].to_string());
        row.push(expectation(&h_i, &s.state).to_string());
        row.extend(idx.iter().map(|&i| s.state[i].norm_sqr().to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_of_diagonal_are_singletons() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0); 4]));
        assert_eq!(coupled_blocks(&h).len(), 4);
    }

    #[test]
    fn blocks_follow_couplings() {
        let mut h = DMatrix::<Complex64>::zeros(5, 5);
        h[(0, 3)] = Complex64::new(1.0, 0.0);
        h[(4, 1)] = Complex64::new(0.0, 2.0);
        let b = coupled_blocks(&h);
        assert_eq!(b, vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn csr_matches_dense() {
        let m = DMatrix::from_fn(4, 4, |r, c| {
            if (r + c) % 3 == 0 {
                Complex64::new(r as f64, c as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let x = DVector::from_fn(4, |i, _| Complex64::new(1.0, i as f64));
        let mut y = DVector::zeros(4);
        Csr::from_dense(&m).mul_vec(&x, &mut y);
        assert!((y - &m * &x).norm() < 1e-14);
    }

    #[test]
    fn method_parse() {
        assert_eq!("rk4".parse::<Method>().unwrap(), Method::Rk4);
        assert_eq!(
            "matrix-exponential".parse::<Method>().unwrap(),
            Method::Expm
        );
        assert!("euler".parse::<Method>().is_err());
    }
}
