//! C ABI for `fracstab`.
//!
//! Every entry point returns a [`FracstabStatus`]; results travel through
//! out-pointers. Systems and trajectories are opaque heap handles released
//! with their `_free` function. On failure a message is kept per thread and
//! read back with [`fracstab_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fracstab::{
    analyze, integrate, lipschitz_bound, mittag_leffler, toda2_controlled, toda2_feedback,
    toda2_prop41_classify, toda_lattice, EquilibriumState, Error, FractionalOrder,
    FractionalSystem, IntegrationConfig, Trajectory, Verdict,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracstabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalFailure = 4,
    NotAnEquilibrium = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracstabVerdict {
    AsymptoticallyStable = 0,
    MarginallyStable = 1,
    Unstable = 2,
}

impl From<Verdict> for FracstabVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::AsymptoticallyStable => FracstabVerdict::AsymptoticallyStable,
            Verdict::MarginallyStable => FracstabVerdict::MarginallyStable,
            Verdict::Unstable => FracstabVerdict::Unstable,
        }
    }
}

/// Scalar summary of a stability analysis.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FracstabReport {
    pub verdict: FracstabVerdict,
    /// `(2/pi) min |arg lambda|`, in `[0, 2]`.
    pub critical_order: f64,
    pub min_arg: f64,
    pub q_used: f64,
    /// Number of eigenvalues (the system dimension).
    pub n_eigenvalues: usize,
}

/// Opaque fractional system.
pub struct FracstabSystem {
    inner: FractionalSystem,
}

/// Opaque integration result.
pub struct FracstabTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> FracstabStatus {
    match err {
        Error::DimensionMismatch { .. } => FracstabStatus::DimensionMismatch,
        Error::UncertifiedEquilibrium(_) => FracstabStatus::NotAnEquilibrium,
        Error::EigenNonConvergence(_)
        | Error::SeriesNonConvergence(_)
        | Error::NonFinite(_)
        | Error::ComplexSpectrum => FracstabStatus::NumericalFailure,
        Error::InvalidOrder(_)
        | Error::InvalidParameter { .. }
        | Error::ArgumentOutOfRange(_)
        | Error::GridTooLarge(_) => FracstabStatus::InvalidArgument,
    }
}

struct Fail(FracstabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FracstabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any error or panic, and maps it to a status.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> FracstabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FracstabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FracstabStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(
    ptr: *mut f64,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [f64], Fail> {
    if len < need {
        return Err(Fail(
            FracstabStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn system_ref<'a>(sys: *const FracstabSystem) -> Result<&'a FractionalSystem, Fail> {
    sys.as_ref().map(|s| &s.inner).ok_or_else(|| null("system"))
}

fn emit_system(
    out: *mut *mut FracstabSystem,
    make: impl FnOnce() -> fracstab::Result<FractionalSystem>,
) -> FracstabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = make()?;
        unsafe { *out = Box::into_raw(Box::new(FracstabSystem { inner })) };
        Ok(())
    })
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fracstab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Two-site Toda lattice with control `-k y^2` (`k != 0`), dimension 3.
#[no_mangle]
pub extern "C" fn fracstab_toda2_new(k: f64, out: *mut *mut FracstabSystem) -> FracstabStatus {
    emit_system(out, || toda2_controlled(k))
}

/// Closed-loop two-site lattice with gains `c1`, `c2` around `(0, m, 0)`.
#[no_mangle]
pub extern "C" fn fracstab_toda2_feedback_new(
    k: f64,
    c1: f64,
    c2: f64,
    m: f64,
    out: *mut *mut FracstabSystem,
) -> FracstabStatus {
    emit_system(out, || toda2_feedback(k, c1, c2, m))
}

/// `n`-site Toda lattice (`n >= 2`), dimension `2n - 1`.
#[no_mangle]
pub extern "C" fn fracstab_toda_lattice_new(
    n: usize,
    out: *mut *mut FracstabSystem,
) -> FracstabStatus {
    emit_system(out, || toda_lattice(n))
}

/// Releases a system. NULL is ignored.
///
/// # Safety
/// `sys` must come from a `fracstab_*_new` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fracstab_system_free(sys: *mut FracstabSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension, or 0 for NULL.
///
/// # Safety
/// `sys` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracstab_system_dim(sys: *const FracstabSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.dim())
}

/// Writes `f(x)` into `out` (`out_len >= dim`).
///
/// # Safety
/// `x` must hold `n` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracstab_system_eval(
    sys: *const FracstabSystem,
    x: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> FracstabStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        let x = input(x, n, "x")?;
        let f = sys.eval(x)?;
        output(out, out_len, f.len(), "out")?[..f.len()].copy_from_slice(&f);
        Ok(())
    })
}

/// Integrates `D^q x = f(x)` from `x0` with step `h` up to `t_end`.
///
/// A run stopped by the blow-up guard still succeeds; query
/// [`fracstab_trajectory_diverged`].
///
/// # Safety
/// `x0` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracstab_integrate(
    sys: *const FracstabSystem,
    q: f64,
    x0: *const f64,
    n: usize,
    h: f64,
    t_end: f64,
    out: *mut *mut FracstabTrajectory,
) -> FracstabStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = input(x0, n, "x0")?;
        let inner = integrate(
            sys,
            FractionalOrder::new(q)?,
            x0,
            &IntegrationConfig::new(h, t_end)?,
        )?;
        *out = Box::into_raw(Box::new(FracstabTrajectory { inner }));
        Ok(())
    })
}

/// Releases a trajectory. NULL is ignored.
///
/// # Safety
/// `traj` must come from [`fracstab_integrate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_free(traj: *mut FracstabTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of stored samples, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_len(traj: *const FracstabTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// State dimension of the samples, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_dim(traj: *const FracstabTrajectory) -> usize {
    traj.as_ref()
        .and_then(|t| t.inner.states.first())
        .map_or(0, Vec::len)
}

/// Whether the blow-up guard cut the run short.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_diverged(traj: *const FracstabTrajectory) -> bool {
    traj.as_ref()
        .is_some_and(|t| t.inner.terminated_early.is_some())
}

/// Copies the sample times (`len` values).
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_times(
    traj: *const FracstabTrajectory,
    out: *mut f64,
    out_len: usize,
) -> FracstabStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        output(out, out_len, t.times.len(), "out")?[..t.times.len()].copy_from_slice(&t.times);
        Ok(())
    })
}

/// Copies the states row-major (`len * dim` values, one row per sample).
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracstab_trajectory_states(
    traj: *const FracstabTrajectory,
    out: *mut f64,
    out_len: usize,
) -> FracstabStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        let need: usize = t.states.iter().map(Vec::len).sum();
        let buf = output(out, out_len, need, "out")?;
        for (row, chunk) in t
            .states
            .iter()
            .zip(buf.chunks_mut(t.states.first().map_or(1, Vec::len)))
        {
            chunk.copy_from_slice(row);
        }
        Ok(())
    })
}

/// Matignon analysis at the equilibrium `x_e` (residual must be below 1e-10).
///
/// Eigenvalues are written to `eig_re` / `eig_im` when both are non-NULL;
/// each then needs room for `dim` values.
///
/// # Safety
/// `x_e` must hold `n` doubles, `report` must be writable, and the eigenvalue
/// buffers must hold `eig_len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn fracstab_analyze(
    sys: *const FracstabSystem,
    x_e: *const f64,
    n: usize,
    q: f64,
    report: *mut FracstabReport,
    eig_re: *mut f64,
    eig_im: *mut f64,
    eig_len: usize,
) -> FracstabStatus {
    guard(|| {
        let sys = system_ref(sys)?;
        if report.is_null() {
            return Err(null("report"));
        }
        let x = input(x_e, n, "x_e")?.to_vec();
        let eq = EquilibriumState::certify(sys, x)?;
        let r = analyze(sys, &eq, FractionalOrder::new(q)?)?;
        let count = r.eigenvalues.len();
        if !eig_re.is_null() && !eig_im.is_null() {
            let re = output(eig_re, eig_len, count, "eig_re")?;
            let im = output(eig_im, eig_len, count, "eig_im")?;
            for (i, z) in r.eigenvalues.iter().enumerate() {
                re[i] = z.re;
                im[i] = z.im;
            }
        }
        *report = FracstabReport {
            verdict: r.verdict.into(),
            critical_order: r.critical_order,
            min_arg: r.min_arg,
            q_used: r.q_used,
            n_eigenvalues: count,
        };
        Ok(())
    })
}

/// Closed-form verdict for the controlled two-site lattice at `(0, m, 0)`.
/// `eigs` (may be NULL) receives `{c1 - m, c2, -k}`.
///
/// # Safety
/// `verdict` must be writable; `eigs` NULL or room for 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn fracstab_prop41_classify(
    k: f64,
    c1: f64,
    c2: f64,
    m: f64,
    verdict: *mut FracstabVerdict,
    eigs: *mut f64,
) -> FracstabStatus {
    guard(|| {
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let (v, w) = toda2_prop41_classify(k, c1, c2, m)?;
        *verdict = v.into();
        if !eigs.is_null() {
            slice::from_raw_parts_mut(eigs, 3).copy_from_slice(&w);
        }
        Ok(())
    })
}

/// `E_alpha(z)` by its power series, `|z| <= 5`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracstab_mittag_leffler(
    alpha: f64,
    z: f64,
    tol: f64,
    out: *mut f64,
) -> FracstabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mittag_leffler(alpha, z, tol)?;
        Ok(())
    })
}

/// Lipschitz constant of the two-site controlled lattice on the box of
/// half-width `delta` around `x0`.
///
/// # Safety
/// `x0` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracstab_lipschitz_bound(
    x0: *const f64,
    n: usize,
    delta: f64,
    k: f64,
    out: *mut f64,
) -> FracstabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lipschitz_bound(input(x0, n, "x0")?, delta, k)?;
        Ok(())
    })
}
