//! C ABI over `bdarma-core`.
//!
//! Every fallible function returns a [`BdarmaStatus`]; on failure the
//! message is kept per thread and read with [`bdarma_last_error`]. Models
//! and draws live behind opaque handles that must be released with their
//! `_free` functions. Arrays are row-major `double` buffers whose lengths
//! are passed explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bdarma_core::metrics::{energy_score, plugin_log_score, EnergyEstimator};
use bdarma_core::model::{self, CovariateSet, Dataset, Matrix, ModelSpec, ParamSet, Posterior, Variant};
use bdarma_core::sampler::{run_chains, PosteriorDraws, SamplerConfig};
use bdarma_core::simplex::{self, Composition, ContrastMatrix, IlrVector};
use bdarma_core::Error;

pub const BDARMA_VARIANT_BASELINE: u32 = 0;
pub const BDARMA_VARIANT_FIXED_EFFECT: u32 = 1;
pub const BDARMA_VARIANT_INTERVENTION: u32 = 2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdarmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Initialization = 5,
    Panic = 6,
}

/// Sampler settings; start from [`bdarma_sampler_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BdarmaSamplerOptions {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
}

/// A model bound to its data and covariates.
pub struct BdarmaModel {
    spec: ModelSpec,
    covariates: CovariateSet,
    data: Dataset,
}

/// Posterior draws returned by [`bdarma_model_sample`].
pub struct BdarmaDraws {
    draws: PosteriorDraws,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(BdarmaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Csv(_) => BdarmaStatus::Io,
            Error::Initialization { .. } => BdarmaStatus::Initialization,
            Error::NonFinite(_) => BdarmaStatus::Numerical,
            _ => BdarmaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BdarmaStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(BdarmaStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            BdarmaStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(BdarmaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn composition(values: &[f64]) -> Result<Composition, Failure> {
    Ok(Composition::new(values.to_vec())?)
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .ok_or_else(|| Failure(BdarmaStatus::InvalidArgument, "array size overflows".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bdarma_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `buf_len > 0`). Returns the full message
/// length plus one.
///
/// # Safety
/// `buf` must be null or point to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bdarma_last_error(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && buf_len > 0 {
            let n = bytes.len().min(buf_len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Helmert ilr coordinates of a composition: `parts` inputs, `parts - 1`
/// outputs.
///
/// # Safety
/// `y` must hold `parts` doubles and `out` room for `parts - 1`.
#[no_mangle]
pub unsafe extern "C" fn bdarma_ilr(y: *const f64, parts: usize, out: *mut f64) -> BdarmaStatus {
    guard(|| {
        let y = composition(input(y, parts, "y")?)?;
        let z = simplex::ilr(&y, &ContrastMatrix::helmert(parts)?)?;
        output(out, parts - 1, "out")?.copy_from_slice(z.as_slice());
        Ok(())
    })
}

/// Inverse Helmert ilr: `dim` coordinates to a composition of `dim + 1`
/// parts.
///
/// # Safety
/// `z` must hold `dim` doubles and `out` room for `dim + 1`.
#[no_mangle]
pub unsafe extern "C" fn bdarma_ilr_inv(z: *const f64, dim: usize, out: *mut f64) -> BdarmaStatus {
    guard(|| {
        let z = IlrVector::new(input(z, dim, "z")?.to_vec())?;
        let y = simplex::ilr_inv(&z, &ContrastMatrix::helmert(dim + 1)?)?;
        output(out, dim + 1, "out")?.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// Aitchison distance between two compositions.
///
/// # Safety
/// `x` and `y` must hold `parts` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_aitchison_distance(
    x: *const f64,
    y: *const f64,
    parts: usize,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        let x = composition(input(x, parts, "x")?)?;
        let y = composition(input(y, parts, "y")?)?;
        write(out, simplex::aitchison_distance(&x, &y)?, "out")
    })
}

/// Transition weight at time `t` for onset `tau`, speed `kappa` and last
/// pre-break index `ell`; zero for `t <= ell`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_gate(t: f64, tau: f64, kappa: f64, ell: f64, out: *mut f64) -> BdarmaStatus {
    guard(|| write(out, model::gate(t, tau, kappa, ell)?, "out"))
}

/// Dirichlet log density of `y` with concentrations `alpha`.
///
/// # Safety
/// `y` and `alpha` must hold `parts` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_dirichlet_log_pdf(
    y: *const f64,
    alpha: *const f64,
    parts: usize,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        let y = composition(input(y, parts, "y")?)?;
        write(out, model::dirichlet_log_pdf(&y, input(alpha, parts, "alpha")?)?, "out")
    })
}

/// Dirichlet log density of `y` at `lambda * mu`.
///
/// # Safety
/// `mu` and `y` must hold `parts` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_plugin_log_score(
    mu: *const f64,
    lambda: f64,
    y: *const f64,
    parts: usize,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        let mu = composition(input(mu, parts, "mu")?)?;
        let y = composition(input(y, parts, "y")?)?;
        write(out, plugin_log_score(&mu, lambda, &y)?, "out")
    })
}

/// Energy score of `n_draws` predictive compositions (row-major,
/// `n_draws x parts`) against `y`. `plugin` selects the `1/M^2` pairwise
/// estimator instead of the unbiased one.
///
/// # Safety
/// `draws` must hold `n_draws * parts` doubles, `y` `parts` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_energy_score(
    draws: *const f64,
    n_draws: usize,
    y: *const f64,
    parts: usize,
    plugin: bool,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        if parts == 0 {
            return Err(Failure(BdarmaStatus::InvalidArgument, "parts must be positive".into()));
        }
        let flat = input(draws, checked_len(n_draws, parts)?, "draws")?;
        let draws = flat.chunks(parts).map(composition).collect::<Result<Vec<_>, _>>()?;
        let y = composition(input(y, parts, "y")?)?;
        let estimator = if plugin {
            EnergyEstimator::Plugin
        } else {
            EnergyEstimator::Unbiased
        };
        write(out, energy_score(&draws, &y, estimator)?, "out")
    })
}

/// Binds a model to data. `y` is `len x parts`, `x_mean` is
/// `len x k_mean` and `x_prec` is `len x k_prec` (include a column of ones
/// for the precision intercept). `break_index` is the last pre-break time
/// (1-based) and must be 0 for the baseline variant.
///
/// # Safety
/// Array arguments must hold the stated number of doubles; `out` must be
/// writable. The returned handle is released with [`bdarma_model_free`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bdarma_model_new(
    variant: u32,
    parts: usize,
    len: usize,
    y: *const f64,
    k_mean: usize,
    x_mean: *const f64,
    k_prec: usize,
    x_prec: *const f64,
    break_index: usize,
    out: *mut *mut BdarmaModel,
) -> BdarmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let variant = match variant {
            BDARMA_VARIANT_BASELINE => Variant::Baseline,
            BDARMA_VARIANT_FIXED_EFFECT => Variant::FixedEffect,
            BDARMA_VARIANT_INTERVENTION => Variant::Intervention,
            v => return Err(Failure(BdarmaStatus::InvalidArgument, format!("unknown variant {v}"))),
        };
        let brk = (break_index > 0).then_some(break_index);
        let spec = ModelSpec::new(variant, parts, k_mean, k_prec, brk)?;
        spec.validate_length(len)?;
        if parts == 0 {
            return Err(Failure(BdarmaStatus::InvalidArgument, "parts must be positive".into()));
        }
        let ys = input(y, checked_len(len, parts)?, "y")?
            .chunks(parts)
            .map(composition)
            .collect::<Result<Vec<_>, _>>()?;
        let covariates = CovariateSet::new(
            Matrix::new(len, k_mean, input(x_mean, checked_len(len, k_mean)?, "x_mean")?.to_vec())?,
            Matrix::new(len, k_prec, input(x_prec, checked_len(len, k_prec)?, "x_prec")?.to_vec())?,
        )?;
        let data = Dataset::with_helmert(ys, parts)?;
        Posterior::new(&spec, &covariates, &data)?;
        *out = Box::into_raw(Box::new(BdarmaModel {
            spec,
            covariates,
            data,
        }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`bdarma_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_free(model: *mut BdarmaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of model parameters; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_n_params(model: *const BdarmaModel) -> usize {
    model.as_ref().map_or(0, |m| model::param_names(&m.spec).len())
}

/// Name of parameter `index` (for example `b[1]` or `Delta`), copied as
/// with [`bdarma_last_error`]. `required` receives the name length plus
/// one.
///
/// # Safety
/// `model` must be a live handle, `buf` null or `buf_len` writable bytes,
/// `required` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_param_name(
    model: *const BdarmaModel,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    required: *mut usize,
) -> BdarmaStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let names = model::param_names(&m.spec);
        let name = names.get(index).ok_or_else(|| {
            Failure(BdarmaStatus::InvalidArgument, format!("parameter index {index} >= {}", names.len()))
        })?;
        if !buf.is_null() && buf_len > 0 {
            let n = name.len().min(buf_len - 1);
            ptr::copy_nonoverlapping(name.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        if !required.is_null() {
            *required = name.len() + 1;
        }
        Ok(())
    })
}

/// Log posterior at constrained parameters given in parameter-name order.
/// Out-of-support values give `-inf`, not an error.
///
/// # Safety
/// `params` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_log_posterior(
    model: *const BdarmaModel,
    params: *const f64,
    n: usize,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let p = ParamSet::from_flat(&m.spec, input(params, n, "params")?)?;
        write(out, model::log_posterior(&m.spec, &p, &m.covariates, &m.data)?, "out")
    })
}

/// Log density over unconstrained coordinates (Jacobian included) and its
/// gradient, the quantity the sampler explores.
///
/// # Safety
/// `theta` and `grad` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_log_density_grad(
    model: *const BdarmaModel,
    theta: *const f64,
    n: usize,
    grad: *mut f64,
    out: *mut f64,
) -> BdarmaStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let post = Posterior::new(&m.spec, &m.covariates, &m.data)?;
        if n != post.dim() {
            return Err(Error::DimensionMismatch {
                expected: post.dim(),
                got: n,
            }
            .into());
        }
        let theta = input(theta, n, "theta")?;
        let grad = output(grad, n, "grad")?;
        let lp = post.log_density_grad(theta, grad);
        write(out, lp, "out")
    })
}

/// Default sampler settings.
#[no_mangle]
pub extern "C" fn bdarma_sampler_options_default() -> BdarmaSamplerOptions {
    let d = SamplerConfig::default();
    BdarmaSamplerOptions {
        chains: d.chains,
        warmup: d.warmup,
        draws: d.draws,
        seed: d.seed,
        target_accept: d.target_accept,
        max_tree_depth: d.max_tree_depth,
    }
}

/// Samples the posterior. `options` may be null for the defaults.
///
/// # Safety
/// `model` must be a live handle, `options` null or valid, `out`
/// writable. The result is released with [`bdarma_draws_free`].
#[no_mangle]
pub unsafe extern "C" fn bdarma_model_sample(
    model: *const BdarmaModel,
    options: *const BdarmaSamplerOptions,
    out: *mut *mut BdarmaDraws,
) -> BdarmaStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| bdarma_sampler_options_default());
        let config = SamplerConfig {
            chains: o.chains,
            warmup: o.warmup,
            draws: o.draws,
            seed: o.seed,
            target_accept: o.target_accept,
            max_tree_depth: o.max_tree_depth,
            ..SamplerConfig::default()
        };
        config.validate()?;
        let draws = run_chains(&m.spec, &m.covariates, &m.data, &config)?;
        *out = Box::into_raw(Box::new(BdarmaDraws { draws }));
        Ok(())
    })
}

/// Releases draws; null is ignored.
///
/// # Safety
/// `draws` must come from [`bdarma_model_sample`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdarma_draws_free(draws: *mut BdarmaDraws) {
    if !draws.is_null() {
        drop(Box::from_raw(draws));
    }
}

/// Number of rows (chains times draws) and parameters.
///
/// # Safety
/// `draws` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_draws_shape(
    draws: *const BdarmaDraws,
    rows: *mut usize,
    cols: *mut usize,
) -> BdarmaStatus {
    guard(|| {
        let d = &borrow(draws, "draws")?.draws;
        write(rows, d.len(), "rows")?;
        write(cols, d.n_params(), "cols")
    })
}

/// Copies the draws row-major, chain-major, into `out` (`len` must equal
/// rows times cols).
///
/// # Safety
/// `draws` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdarma_draws_values(draws: *const BdarmaDraws, out: *mut f64, len: usize) -> BdarmaStatus {
    guard(|| {
        let d = &borrow(draws, "draws")?.draws;
        if len != d.values.len() {
            return Err(Error::DimensionMismatch {
                expected: d.values.len(),
                got: len,
            }
            .into());
        }
        output(out, len, "out")?.copy_from_slice(&d.values);
        Ok(())
    })
}

/// Copies the log posterior of every draw (`len` must equal rows).
///
/// # Safety
/// `draws` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdarma_draws_lp(draws: *const BdarmaDraws, out: *mut f64, len: usize) -> BdarmaStatus {
    guard(|| {
        let d = &borrow(draws, "draws")?.draws;
        if len != d.lp.len() {
            return Err(Error::DimensionMismatch {
                expected: d.lp.len(),
                got: len,
            }
            .into());
        }
        output(out, len, "out")?.copy_from_slice(&d.lp);
        Ok(())
    })
}

/// Largest split R-hat (direction coordinates excluded) and the number of
/// divergent transitions.
///
/// # Safety
/// `draws` must be a live handle; `max_rhat` and `divergences` writable.
#[no_mangle]
pub unsafe extern "C" fn bdarma_draws_diagnostics(
    draws: *const BdarmaDraws,
    max_rhat: *mut f64,
    divergences: *mut usize,
) -> BdarmaStatus {
    guard(|| {
        let diag = borrow(draws, "draws")?.draws.diagnostics();
        write(max_rhat, diag.max_rhat(), "max_rhat")?;
        write(divergences, diag.divergences, "divergences")
    })
}
