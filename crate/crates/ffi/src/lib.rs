//! C ABI over `rmnp-core`.
//!
//! Matrices and optimizers are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`RmnpStatus`]; the message for the most recent failure on the calling
//! thread is available from [`rmnp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rmnp_core::dominance;
use rmnp_core::optim::{Optimizer, OptimizerConfig, OptimizerKind, ParamShape, Schedule};
use rmnp_core::precond::{newton_schulz5, row_normalize, NsCoefficients};
use rmnp_core::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmnpStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmnpOptimizerKind {
    Rmnp = 0,
    Muon = 1,
    AdamW = 2,
    MomentumSgd = 3,
}

impl From<RmnpOptimizerKind> for OptimizerKind {
    fn from(k: RmnpOptimizerKind) -> Self {
        match k {
            RmnpOptimizerKind::Rmnp => Self::Rmnp,
            RmnpOptimizerKind::Muon => Self::Muon,
            RmnpOptimizerKind::AdamW => Self::AdamW,
            RmnpOptimizerKind::MomentumSgd => Self::MomentumSgd,
        }
    }
}

impl From<OptimizerKind> for RmnpOptimizerKind {
    fn from(k: OptimizerKind) -> Self {
        match k {
            OptimizerKind::Rmnp => Self::Rmnp,
            OptimizerKind::Muon => Self::Muon,
            OptimizerKind::AdamW => Self::AdamW,
            OptimizerKind::MomentumSgd => Self::MomentumSgd,
        }
    }
}

/// Optimizer hyperparameters. Newton-Schulz coefficients are fixed to the
/// library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RmnpOptimizerConfig {
    pub kind: RmnpOptimizerKind,
    pub lr_matrix: f64,
    pub lr_adamw: f64,
    pub beta: f64,
    pub adamw_beta1: f64,
    pub adamw_beta2: f64,
    pub weight_decay: f64,
    pub rms_scaling: bool,
    pub eps: f64,
    pub rn_eps: f64,
}

impl From<&RmnpOptimizerConfig> for OptimizerConfig {
    fn from(c: &RmnpOptimizerConfig) -> Self {
        Self {
            kind: c.kind.into(),
            lr_matrix: c.lr_matrix,
            lr_adamw: c.lr_adamw,
            beta: c.beta,
            adamw_betas: (c.adamw_beta1, c.adamw_beta2),
            weight_decay: c.weight_decay,
            rms_scaling: c.rms_scaling,
            eps: c.eps,
            ns_coeffs: NsCoefficients::default(),
            rn_eps: c.rn_eps,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RmnpDominance {
    pub r_avg: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Some ratio exceeded the cap and was clamped.
    pub clamped: bool,
    /// Some row had zero diagonal and zero off-diagonal mass.
    pub degenerate: bool,
}

/// Opaque dense row-major matrix.
pub struct RmnpMatrix(Matrix);

/// Opaque mixed-strategy optimizer.
pub struct RmnpOptimizer(Optimizer);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RmnpStatus {
    match e {
        Error::Dimension { .. } => RmnpStatus::Dimension,
        Error::NoConvergence { .. } | Error::RankDeficient { .. } | Error::Divergence { .. } => {
            RmnpStatus::Numerical
        }
        _ => RmnpStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (RmnpStatus, String)>) -> RmnpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmnpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            RmnpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (RmnpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RmnpStatus, String) {
    (RmnpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn matrix_ref<'a>(p: *const RmnpMatrix, what: &str) -> Result<&'a Matrix, (RmnpStatus, String)> {
    // SAFETY: caller passes either null or a live handle from this library.
    unsafe { p.as_ref() }.map(|m| &m.0).ok_or_else(|| null(what))
}

unsafe fn emit(out: *mut *mut RmnpMatrix, m: Matrix) -> Result<(), (RmnpStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and points to writable storage per the contract.
    unsafe { *out = Box::into_raw(Box::new(RmnpMatrix(m))) };
    Ok(())
}

/// Message describing the last failed call on this thread, or an empty
/// string. The pointer stays valid until the next failing call on the same
/// thread.
#[no_mangle]
pub extern "C" fn rmnp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a `rows`×`cols` matrix. `data` holds `rows*cols` row-major values,
/// or is null for a zero matrix.
///
/// # Safety
/// `data` must be null or point to `rows*cols` readable doubles; `out` must
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rmnp_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut RmnpMatrix,
) -> RmnpStatus {
    guard(|| {
        if rows == 0 || cols == 0 {
            return Err((RmnpStatus::Dimension, format!("shape {rows}x{cols} has a zero dimension")));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| (RmnpStatus::Dimension, "shape overflows".to_string()))?;
        let m = if data.is_null() {
            Matrix::zeros(rows, cols)
        } else {
            // SAFETY: caller guarantees `len` readable values at `data`.
            let src = unsafe { std::slice::from_raw_parts(data, len) };
            Matrix::from_vec(rows, cols, src.to_vec()).map_err(lib)?
        };
        unsafe { emit(out, m) }
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rmnp_matrix_free(m: *mut RmnpMatrix) {
    if !m.is_null() {
        // SAFETY: handle was produced by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Row count, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rmnp_matrix_rows(m: *const RmnpMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.rows())
}

/// Column count, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rmnp_matrix_cols(m: *const RmnpMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.cols())
}

/// Copies the row-major entries into `buf`, which must hold exactly `len`
/// values.
///
/// # Safety
/// `m` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rmnp_matrix_copy_data(m: *const RmnpMatrix, buf: *mut f64, len: usize) -> RmnpStatus {
    guard(|| {
        let m = unsafe { matrix_ref(m, "matrix") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != m.len() {
            return Err((RmnpStatus::Dimension, format!("buffer holds {len}, matrix has {}", m.len())));
        }
        // SAFETY: `buf` has room for `len` values per the contract.
        unsafe { ptr::copy_nonoverlapping(m.as_slice().as_ptr(), buf, len) };
        Ok(())
    })
}

/// Row-wise ℓ2 normalization into a new matrix. Rows with norm ≤ `eps` become zero.
///
/// # Safety
/// `v` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rmnp_row_normalize(v: *const RmnpMatrix, eps: f64, out: *mut *mut RmnpMatrix) -> RmnpStatus {
    guard(|| {
        let v = unsafe { matrix_ref(v, "v") }?;
        if !(eps >= 0.0) {
            return Err((RmnpStatus::InvalidArgument, format!("eps {eps} must be >= 0")));
        }
        unsafe { emit(out, row_normalize(v, eps)) }
    })
}

/// Five-step Newton-Schulz orthogonalization into a new matrix.
///
/// # Safety
/// `v` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rmnp_newton_schulz5(v: *const RmnpMatrix, out: *mut *mut RmnpMatrix) -> RmnpStatus {
    guard(|| {
        let v = unsafe { matrix_ref(v, "v") }?;
        unsafe { emit(out, newton_schulz5(v, &NsCoefficients::default())) }
    })
}

/// Frobenius, (1,2) and (∞,2) norms. Any output pointer may be null.
///
/// # Safety
/// `v` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rmnp_norms(
    v: *const RmnpMatrix,
    frobenius: *mut f64,
    one_two: *mut f64,
    inf_two: *mut f64,
) -> RmnpStatus {
    guard(|| {
        let v = unsafe { matrix_ref(v, "v") }?;
        // SAFETY: each pointer is null or writable per the contract.
        unsafe {
            if let Some(p) = frobenius.as_mut() {
                *p = v.frobenius_norm();
            }
            if let Some(p) = one_two.as_mut() {
                *p = v.one_two_norm();
            }
            if let Some(p) = inf_two.as_mut() {
                *p = v.inf_two_norm();
            }
        }
        Ok(())
    })
}

/// Diagonal-dominance summary of `v`'s row Gram matrix, with ratios above
/// `cap` clamped.
///
/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rmnp_dominance(v: *const RmnpMatrix, cap: f64, out: *mut RmnpDominance) -> RmnpStatus {
    guard(|| {
        let v = unsafe { matrix_ref(v, "v") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(cap > 0.0) {
            return Err((RmnpStatus::InvalidArgument, format!("cap {cap} must be > 0")));
        }
        let r = dominance::report(0, 0, v, cap).map_err(lib)?;
        // SAFETY: non-null and writable per the contract.
        unsafe {
            *out = RmnpDominance {
                r_avg: r.r_avg,
                r_min: r.r_min,
                r_max: r.r_max,
                clamped: r.clamped,
                degenerate: r.degenerate,
            }
        };
        Ok(())
    })
}

/// Library defaults for `kind`.
#[no_mangle]
pub extern "C" fn rmnp_optimizer_config_default(kind: RmnpOptimizerKind) -> RmnpOptimizerConfig {
    let c = OptimizerConfig::default();
    RmnpOptimizerConfig {
        kind,
        lr_matrix: c.lr_matrix,
        lr_adamw: c.lr_adamw,
        beta: c.beta,
        adamw_beta1: c.adamw_betas.0,
        adamw_beta2: c.adamw_betas.1,
        weight_decay: c.weight_decay,
        rms_scaling: c.rms_scaling,
        eps: c.eps,
        rn_eps: c.rn_eps,
    }
}

/// Creates an optimizer over `count` parameters of shapes `rows[i]`×`cols[i]`.
/// Parameters with both dimensions above one use the matrix optimizer; the
/// rest use AdamW.
///
/// # Safety
/// `config` must be readable; `rows` and `cols` must hold `count` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rmnp_optimizer_new(
    config: *const RmnpOptimizerConfig,
    rows: *const usize,
    cols: *const usize,
    count: usize,
    out: *mut *mut RmnpOptimizer,
) -> RmnpStatus {
    guard(|| {
        // SAFETY: pointer validity per the contract.
        let cfg = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if count > 0 && (rows.is_null() || cols.is_null()) {
            return Err(null("shape arrays"));
        }
        let (rs, cs) = if count == 0 {
            (&[][..], &[][..])
        } else {
            unsafe { (std::slice::from_raw_parts(rows, count), std::slice::from_raw_parts(cols, count)) }
        };
        let mut shapes = Vec::with_capacity(count);
        for (&r, &c) in rs.iter().zip(cs) {
            if r == 0 || c == 0 {
                return Err((RmnpStatus::Dimension, format!("parameter shape {r}x{c}")));
            }
            shapes.push(ParamShape::Matrix { rows: r, cols: c });
        }
        let opt = Optimizer::new(cfg.into(), &shapes).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(RmnpOptimizer(opt))) };
        Ok(())
    })
}

/// Releases an optimizer. Null is ignored.
///
/// # Safety
/// `opt` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rmnp_optimizer_free(opt: *mut RmnpOptimizer) {
    if !opt.is_null() {
        drop(unsafe { Box::from_raw(opt) });
    }
}

/// Applies one step to `params` in place using `grads`. Both arrays hold
/// `count` handles in the order the optimizer was created with. On error the
/// parameters are left unchanged.
///
/// # Safety
/// `opt` must be live; `params` and `grads` must each hold `count` live,
/// distinct handles.
#[no_mangle]
pub unsafe extern "C" fn rmnp_optimizer_step(
    opt: *mut RmnpOptimizer,
    params: *const *mut RmnpMatrix,
    grads: *const *const RmnpMatrix,
    count: usize,
    lr_matrix: f64,
    lr_adamw: f64,
) -> RmnpStatus {
    guard(|| {
        let opt = unsafe { opt.as_mut() }.ok_or_else(|| null("optimizer"))?;
        if count > 0 && (params.is_null() || grads.is_null()) {
            return Err(null("parameter arrays"));
        }
        if !(lr_matrix >= 0.0 && lr_adamw >= 0.0) {
            return Err((RmnpStatus::InvalidArgument, "learning rates must be >= 0".into()));
        }
        let (ps, gs) = if count == 0 {
            (&[][..], &[][..])
        } else {
            unsafe { (std::slice::from_raw_parts(params, count), std::slice::from_raw_parts(grads, count)) }
        };
        let mut w = Vec::with_capacity(count);
        let mut g = Vec::with_capacity(count);
        for (&p, &q) in ps.iter().zip(gs) {
            w.push(unsafe { matrix_ref(p, "parameter") }?.clone());
            g.push(unsafe { matrix_ref(q, "gradient") }?.clone());
        }
        opt.0.step(&mut w, &g, lr_matrix, lr_adamw).map_err(lib)?;
        for (&p, new) in ps.iter().zip(w) {
            // SAFETY: checked non-null above; handles are distinct per the contract.
            unsafe { (*p).0 = new };
        }
        Ok(())
    })
}

/// Cosine schedule with linear warmup over the first 10% of `total_steps`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rmnp_schedule_lr(base_lr: f64, total_steps: u64, t: u64, out: *mut f64) -> RmnpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Schedule::cosine_warmup(base_lr, total_steps);
        s.validate().map_err(lib)?;
        let lr = s.lr(t).map_err(lib)?;
        unsafe { *out = lr };
        Ok(())
    })
}
