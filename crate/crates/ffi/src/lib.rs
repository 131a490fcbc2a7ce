//! C interface to `casecontrol`.
//!
//! Every fallible function returns `CC_OK` or one of the `CC_ERR_*` codes and
//! writes results through out-pointers. After a failure,
//! `cc_last_error_message` describes it on the calling thread. Handles are
//! opaque, owned by the caller and released with the matching `*_free`.
//! Pointer arguments must be valid for the access described; string
//! arguments are NUL-terminated UTF-8.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use casecontrol::ar::{ar_curve, ArConfig, ArCurve, BootstrapDiagnostics, ResampleMode};
use casecontrol::data::Ingested;
use casecontrol::nalgebra::DMatrix;
use casecontrol::rr::{estimate_betas, rr_band, BetaEstimate, ClipOptions, Method, PGrid, RRBand};
use casecontrol::{
    ingest_csv, odds_ratio_2x2, BasisSpec, CountTable2x2, CsvSchema, Design, Error, LogitOptions,
    ObservedDataset, H0,
};

pub const CC_OK: i32 = 0;
/// A Rust panic was caught at the boundary.
pub const CC_ERR_PANIC: i32 = 1;
pub const CC_ERR_INVALID_ARGUMENT: i32 = 2;
pub const CC_ERR_IO: i32 = 3;
pub const CC_ERR_MISSING_COLUMN: i32 = 10;
pub const CC_ERR_NON_BINARY_OUTCOME: i32 = 11;
pub const CC_ERR_NON_BINARY_TREATMENT: i32 = 12;
pub const CC_ERR_PARSE_VALUE: i32 = 13;
pub const CC_ERR_EMPTY_STRATUM: i32 = 14;
pub const CC_ERR_ZERO_CELL: i32 = 20;
pub const CC_ERR_ZERO_DENOMINATOR: i32 = 21;
pub const CC_ERR_ZERO_RETRO_PROB: i32 = 22;
pub const CC_ERR_OVERLAP_VIOLATION: i32 = 23;
pub const CC_ERR_INVALID_POPULATION: i32 = 24;
pub const CC_ERR_DEGENERATE_COLUMN: i32 = 30;
pub const CC_ERR_SEPARATION: i32 = 31;
pub const CC_ERR_SINGULAR: i32 = 32;
pub const CC_ERR_NOT_CONVERGED: i32 = 33;
pub const CC_ERR_PROBABILITY_OUT_OF_RANGE: i32 = 34;
pub const CC_ERR_BOOTSTRAP_DEGENERATE: i32 = 40;

pub const CC_DESIGN_CASE_CONTROL: i32 = 1;
pub const CC_DESIGN_CASE_POPULATION: i32 = 2;

pub const CC_METHOD_COMBINED: i32 = 0;
pub const CC_METHOD_PLUGIN: i32 = 1;

pub const CC_RESAMPLE_PLAIN: i32 = 0;
pub const CC_RESAMPLE_STRATIFIED: i32 = 1;

/// A validated sample.
pub struct CcDataset {
    inner: ObservedDataset,
}

/// β̂(y) estimates together with the relative-risk band.
pub struct CcRrResult {
    estimates: Vec<BetaEstimate>,
    band: RRBand,
}

/// Attributable-risk curve with bootstrap diagnostics.
pub struct CcArResult {
    curve: ArCurve,
    diagnostics: BootstrapDiagnostics,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcBetaEstimate {
    pub y_stratum: u8,
    pub value: f64,
    pub se: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcBandRow {
    pub p: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcArRow {
    pub p: f64,
    pub point: f64,
    pub upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CC_OK,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.code()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CC_ERR_PANIC
        }
    }
}

fn invalid(msg: &str) -> Error {
    Error::InvalidArgument(msg.to_string())
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Error> {
    p.as_mut()
        .ok_or_else(|| invalid(&format!("null pointer `{name}`")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Error> {
    p.as_ref()
        .ok_or_else(|| invalid(&format!("null handle `{name}`")))
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Error> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| invalid("string argument is not valid UTF-8"))
}

unsafe fn basis(p: *const c_char) -> Result<BasisSpec, Error> {
    opt_str(p)?.map_or_else(|| Ok(BasisSpec::default()), str::parse)
}

fn design(code: i32) -> Result<Design, Error> {
    match code {
        CC_DESIGN_CASE_CONTROL => Ok(Design::CaseControl),
        CC_DESIGN_CASE_POPULATION => Ok(Design::CasePopulation),
        other => Err(invalid(&format!("unknown design code {other}"))),
    }
}

/// NaN requests the sample share of cases.
fn h0(v: f64) -> H0 {
    if v.is_nan() {
        H0::Estimate
    } else {
        H0::Known(v)
    }
}

fn index<T: Copy>(rows: &[T], i: usize) -> Result<T, Error> {
    rows.get(i)
        .copied()
        .ok_or_else(|| invalid(&format!("row index {i} out of range (len {})", rows.len())))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Odds ratio of a 2×2 table of counts n[y][t].
#[no_mangle]
pub unsafe extern "C" fn cc_odds_ratio_2x2(
    y0t0: u64,
    y0t1: u64,
    y1t0: u64,
    y1t1: u64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        *out_ref(out, "out")? = odds_ratio_2x2(&CountTable2x2::new(y0t0, y0t1, y1t0, y1t1))?;
        Ok(())
    })
}

/// Builds a dataset from `n` rows: 0/1 arrays `y` and `t` and a row-major
/// `n × k` covariate matrix `x` (NULL when `k == 0`). Pass NaN as `h0` to use
/// the sample share of cases.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_new(
    y: *const u8,
    t: *const u8,
    x: *const f64,
    n: usize,
    k: usize,
    design_code: i32,
    h0_value: f64,
    out: *mut *mut CcDataset,
) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        if y.is_null() || t.is_null() || (k > 0 && x.is_null()) {
            return Err(invalid("null data pointer"));
        }
        let y = std::slice::from_raw_parts(y, n).to_vec();
        let t = std::slice::from_raw_parts(t, n).to_vec();
        let x = if k == 0 {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_row_slice(n, k, std::slice::from_raw_parts(x, n * k))
        };
        let names = (0..k).map(|j| format!("x{}", j + 1)).collect();
        let inner = ObservedDataset::new(y, t, x, names, design(design_code)?, h0(h0_value))?;
        *out = Box::into_raw(Box::new(CcDataset { inner }));
        Ok(())
    })
}

/// Reads a CSV file. Every column other than `y_col` and `t_col` is a
/// covariate; rows with missing fields are dropped.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_from_csv(
    path: *const c_char,
    y_col: *const c_char,
    t_col: *const c_char,
    design_code: i32,
    h0_value: f64,
    out: *mut *mut CcDataset,
) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = opt_str(path)?.ok_or_else(|| invalid("null path"))?;
        let schema = CsvSchema {
            y: opt_str(y_col)?.unwrap_or("y").to_string(),
            t: opt_str(t_col)?.unwrap_or("t").to_string(),
            covariates: None,
        };
        let Ingested { dataset, .. } =
            ingest_csv(path, &schema, design(design_code)?, h0(h0_value))?;
        *out = Box::into_raw(Box::new(CcDataset { inner: dataset }));
        Ok(())
    })
}

/// Number of rows, or 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_n(ds: *const CcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

#[no_mangle]
pub unsafe extern "C" fn cc_dataset_n_cases(ds: *const CcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_cases())
}

#[no_mangle]
pub unsafe extern "C" fn cc_dataset_free(ds: *mut CcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// β̂(y) for every identified stratum and the relative-risk band over the
/// grid 0, step, …, pbar. NULL basis strings select the default basis.
#[no_mangle]
pub unsafe extern "C" fn cc_rr(
    ds: *const CcDataset,
    pro_basis: *const c_char,
    retro_basis: *const c_char,
    method: i32,
    alpha: f64,
    pbar: f64,
    step: f64,
    out: *mut *mut CcRrResult,
) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = &handle(ds, "ds")?.inner;
        let method = match method {
            CC_METHOD_COMBINED => Method::Combined,
            CC_METHOD_PLUGIN => Method::PlugIn,
            other => return Err(invalid(&format!("unknown method code {other}"))),
        };
        let estimates = estimate_betas(
            data,
            &basis(pro_basis)?,
            &basis(retro_basis)?,
            method,
            &LogitOptions::default(),
            &ClipOptions::default(),
        )?;
        let band = rr_band(
            &estimates[0],
            estimates.get(1),
            alpha,
            data.design(),
            &PGrid::new(pbar, step)?,
        )?;
        *out = Box::into_raw(Box::new(CcRrResult { estimates, band }));
        Ok(())
    })
}

/// Number of β̂(y) estimates: 2 for case-control, 1 for case-population data.
#[no_mangle]
pub unsafe extern "C" fn cc_rr_n_estimates(res: *const CcRrResult) -> usize {
    res.as_ref().map_or(0, |r| r.estimates.len())
}

#[no_mangle]
pub unsafe extern "C" fn cc_rr_estimate(
    res: *const CcRrResult,
    i: usize,
    out: *mut CcBetaEstimate,
) -> i32 {
    guard(|| {
        let e = index(&handle(res, "res")?.estimates, i)?;
        *out_ref(out, "out")? = CcBetaEstimate {
            y_stratum: e.y_stratum,
            value: e.value,
            se: e.se,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_rr_band_len(res: *const CcRrResult) -> usize {
    res.as_ref().map_or(0, |r| r.band.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn cc_rr_band_row(
    res: *const CcRrResult,
    i: usize,
    out: *mut CcBandRow,
) -> i32 {
    guard(|| {
        let r = index(&handle(res, "res")?.band.rows, i)?;
        *out_ref(out, "out")? = CcBandRow {
            p: r.p,
            point: r.point,
            lower: r.lower,
            upper: r.upper,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_rr_free(res: *mut CcRrResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Attributable-risk upper bound with bias-corrected bootstrap limits over
/// the grid 0, step, …, pbar using `b` replications seeded by `seed`.
#[no_mangle]
pub unsafe extern "C" fn cc_ar(
    ds: *const CcDataset,
    pro_basis: *const c_char,
    retro_basis: *const c_char,
    alpha: f64,
    pbar: f64,
    step: f64,
    b: usize,
    seed: u64,
    resample: i32,
    out: *mut *mut CcArResult,
) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = &handle(ds, "ds")?.inner;
        let cfg = ArConfig {
            retro_spec: basis(retro_basis)?,
            pro_spec: basis(pro_basis)?,
            grid: PGrid::new(pbar, step)?,
            alpha,
            b,
            seed,
            resample: match resample {
                CC_RESAMPLE_PLAIN => ResampleMode::PlainIid,
                CC_RESAMPLE_STRATIFIED => ResampleMode::StratifiedByY,
                other => return Err(invalid(&format!("unknown resample code {other}"))),
            },
            logit: LogitOptions::default(),
            clip: ClipOptions::default(),
        };
        let (curve, diagnostics) = ar_curve(data, &cfg)?;
        *out = Box::into_raw(Box::new(CcArResult { curve, diagnostics }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_ar_len(res: *const CcArResult) -> usize {
    res.as_ref().map_or(0, |r| r.curve.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn cc_ar_row(res: *const CcArResult, i: usize, out: *mut CcArRow) -> i32 {
    guard(|| {
        let r = index(&handle(res, "res")?.curve.rows, i)?;
        *out_ref(out, "out")? = CcArRow {
            p: r.p,
            point: r.point,
            upper: r.upper,
        };
        Ok(())
    })
}

/// Bootstrap replicates dropped because their refit failed.
#[no_mangle]
pub unsafe extern "C" fn cc_ar_failed_replicates(res: *const CcArResult) -> usize {
    res.as_ref().map_or(0, |r| r.diagnostics.failed_replicates)
}

#[no_mangle]
pub unsafe extern "C" fn cc_ar_free(res: *mut CcArResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
