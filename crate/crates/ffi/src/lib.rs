//! C ABI over `qweyl-core`.
//!
//! Conventions:
//! - every fallible function returns a [`QweylStatus`]; results go through out-pointers
//! - objects are opaque handles created by `*_new`/`qweyl_evolve` and released by `*_free`
//! - on failure, [`qweyl_last_error`] holds a message for the calling thread
//! - panics never cross the boundary; they surface as `QWEYL_STATUS_INTERNAL`
//!
//! States `|n₁,n₂,n₃⟩` are passed as pointers to three `uint32_t`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qweyl_core::evolve::{self, Method, PropagateOptions, Trajectory};
use qweyl_core::fockspec::{
    self, FockOperator, HamiltonianModel, SplitHamiltonian, COUPLING_TOL, INTERIOR_MARGIN,
};
use qweyl_core::realize::{self, ExpansionMode, MultiIndex, Theta};
use qweyl_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QweylStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NearCutoff = 3,
    StepSize = 4,
    NonFinite = 5,
    BufferTooSmall = 6,
    Internal = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QweylMode {
    Paper = 0,
    Rederived = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QweylModel {
    Substituted = 0,
    Replacement = 1,
    Reference = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QweylMethod {
    Expm = 0,
    Rk4 = 1,
}

impl From<QweylMode> for ExpansionMode {
    fn from(m: QweylMode) -> Self {
        match m {
            QweylMode::Paper => ExpansionMode::Paper,
            QweylMode::Rederived => ExpansionMode::Rederived,
        }
    }
}

impl From<QweylModel> for HamiltonianModel {
    fn from(m: QweylModel) -> Self {
        match m {
            QweylModel::Substituted => HamiltonianModel::Substituted,
            QweylModel::Replacement => HamiltonianModel::Replacement,
            QweylModel::Reference => HamiltonianModel::Reference,
        }
    }
}

impl From<QweylMethod> for Method {
    fn from(m: QweylMethod) -> Self {
        match m {
            QweylMethod::Expm => Method::Expm,
            QweylMethod::Rk4 => Method::Rk4,
        }
    }
}

/// Truncated Hamiltonian matrix on the Fock basis.
pub struct QweylHamiltonian {
    op: FockOperator,
}

/// Result of [`qweyl_evolve`].
pub struct QweylTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QweylStatus {
    match e {
        Error::NearCutoff { .. } => QweylStatus::NearCutoff,
        Error::StepSize { .. } => QweylStatus::StepSize,
        Error::NonFinite { .. } => QweylStatus::NonFinite,
        _ => QweylStatus::InvalidArgument,
    }
}

/// Runs `f`, recording an error message and mapping panics.
fn guard<F>(f: F) -> QweylStatus
where
    F: FnOnce() -> Result<(), (QweylStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QweylStatus::Ok,
        Ok(Err((s, msg))) => {
            set_last_error(&msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic");
            QweylStatus::Internal
        }
    }
}

fn core<T>(r: qweyl_core::Result<T>) -> Result<T, (QweylStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (QweylStatus, String) {
    (QweylStatus::NullPointer, format!("{what} is null"))
}

unsafe fn state_arg(p: *const u32, what: &str) -> Result<MultiIndex, (QweylStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(MultiIndex::new(s[0], s[1], s[2]))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qweyl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qweyl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Largest residual of the fifteen defining relations on monomials of total
/// degree ≤ `degree` at `q = e^{iθ}`.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn qweyl_relation_residual(
    theta: f64,
    degree: u32,
    out: *mut f64,
) -> QweylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rep = core(realize::relation_residual_numeric(Theta(theta), degree))?;
        *out = rep.max_residual;
        Ok(())
    })
}

/// Builds `H = H₀ + θH₁` with per-mode cutoff `n_max`.
///
/// # Safety
/// `out` must be valid for one pointer write. Release the handle with
/// [`qweyl_hamiltonian_free`].
#[no_mangle]
pub unsafe extern "C" fn qweyl_hamiltonian_new(
    n_max: u32,
    theta: f64,
    mode: QweylMode,
    model: QweylModel,
    out: *mut *mut QweylHamiltonian,
) -> QweylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !theta.is_finite() {
            return Err((
                QweylStatus::InvalidArgument,
                format!("theta = {theta} is not finite"),
            ));
        }
        let split = core(SplitHamiltonian::build(n_max, mode.into(), model.into()))?;
        *out = Box::into_raw(Box::new(QweylHamiltonian {
            op: split.at(theta),
        }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`qweyl_hamiltonian_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qweyl_hamiltonian_free(h: *mut QweylHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Matrix dimension `(n_max + 1)³`; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qweyl_hamiltonian_dim(h: *const QweylHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.op.basis.dim())
}

/// `⟨row|H|col⟩`.
///
/// # Safety
/// `h` must be a live handle; `row`, `col` must point to three `uint32_t`;
/// `re`, `im` must be valid for one `double` write each.
#[no_mangle]
pub unsafe extern "C" fn qweyl_hamiltonian_element(
    h: *const QweylHamiltonian,
    row: *const u32,
    col: *const u32,
    re: *mut f64,
    im: *mut f64,
) -> QweylStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let (r, c) = (state_arg(row, "row")?, state_arg(col, "col")?);
        let z = h.op.element(&r, &c).ok_or_else(|| {
            (
                QweylStatus::InvalidArgument,
                format!("state outside N_max = {}", h.op.basis.n_max()),
            )
        })?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Copies the matrix as row-major interleaved `(re, im)` pairs; `len` is the
/// buffer length in doubles and must be at least `2·dim²`.
///
/// # Safety
/// `buf` must be valid for `len` `double` writes.
#[no_mangle]
pub unsafe extern "C" fn qweyl_hamiltonian_copy(
    h: *const QweylHamiltonian,
    buf: *mut f64,
    len: usize,
) -> QweylStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = h.op.basis.dim();
        if len < 2 * n * n {
            return Err((
                QweylStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", 2 * n * n),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * n * n);
        for r in 0..n {
            for c in 0..n {
                let z = h.op.matrix[(r, c)];
                out[2 * (r * n + c)] = z.re;
                out[2 * (r * n + c) + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// Fraction of `H₁` coupling weight outside the offsets `{−1,0,1}³`, over
/// interior columns.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn qweyl_mixing_outside_fraction(
    n_max: u32,
    mode: QweylMode,
    model: QweylModel,
    out: *mut f64,
) -> QweylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let split = core(SplitHamiltonian::build(n_max, mode.into(), model.into()))?;
        let p = fockspec::sparsity_pattern(&split.h1, split.basis, COUPLING_TOL, INTERIOR_MARGIN);
        *out = p.verdict.outside_fraction;
        Ok(())
    })
}

/// First-order shift `θ⟨n|H₁|n⟩`, independent of any cutoff.
///
/// # Safety
/// `n` must point to three `uint32_t`; `re`, `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qweyl_energy_shift(
    n: *const u32,
    theta: f64,
    mode: QweylMode,
    model: QweylModel,
    re: *mut f64,
    im: *mut f64,
) -> QweylStatus {
    guard(|| {
        let s = state_arg(n, "n")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let z = fockspec::energy_shift(&s, theta, mode.into(), model.into());
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Propagates the basis state `initial` for time `t_final` with step `dt`.
/// The run stops early (see [`qweyl_trajectory_aborted`]) once an edge state
/// holds more than `1e-6` of the probability.
///
/// # Safety
/// `h` must be a live handle, `initial` must point to three `uint32_t`, `out`
/// must be valid for one pointer write. Release with [`qweyl_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn qweyl_evolve(
    h: *const QweylHamiltonian,
    initial: *const u32,
    t_final: f64,
    dt: f64,
    method: QweylMethod,
    out: *mut *mut QweylTrajectory,
) -> QweylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        let n = state_arg(initial, "initial")?;
        let psi = core(evolve::basis_state(h.op.basis, &n))?;
        let opts = PropagateOptions {
            t_final,
            dt,
            method: method.into(),
            stride: 1,
            ..PropagateOptions::default()
        };
        let traj = core(evolve::propagate(&h.op.matrix, h.op.basis, &psi, &opts))?;
        *out = Box::into_raw(Box::new(QweylTrajectory { traj }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`qweyl_evolve`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qweyl_trajectory_free(t: *mut QweylTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stored time points (including `t = 0`); 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qweyl_trajectory_len(t: *const QweylTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.traj.times.len())
}

/// Whether the run stopped at the truncation edge.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qweyl_trajectory_aborted(t: *const QweylTrajectory) -> bool {
    t.as_ref().is_some_and(|t| t.traj.aborted.is_some())
}

/// Copies times and squared norms `P(t)`; both buffers need
/// [`qweyl_trajectory_len`] entries. Either may be null to skip it.
///
/// # Safety
/// Non-null buffers must be valid for `len` `double` writes.
#[no_mangle]
pub unsafe extern "C" fn qweyl_trajectory_norms(
    t: *const QweylTrajectory,
    times: *mut f64,
    norms: *mut f64,
    len: usize,
) -> QweylStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("t"))?;
        let n = t.traj.times.len();
        if len < n {
            return Err((
                QweylStatus::BufferTooSmall,
                format!("need {n} entries, got {len}"),
            ));
        }
        if !times.is_null() {
            std::slice::from_raw_parts_mut(times, n).copy_from_slice(&t.traj.times);
        }
        if !norms.is_null() {
            std::slice::from_raw_parts_mut(norms, n).copy_from_slice(&t.traj.norms);
        }
        Ok(())
    })
}

/// `max_t |dP/dt − 2⟨H_I⟩|` along the trajectory.
///
/// # Safety
/// `t`, `h` must be live handles with `t` produced from `h`; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qweyl_norm_flow_deviation(
    t: *const QweylTrajectory,
    h: *const QweylHamiltonian,
    out: *mut f64,
) -> QweylStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("t"))?;
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(evolve::norm_flow_check(&t.traj, &h.op.matrix))?.max_deviation;
        Ok(())
    })
}
