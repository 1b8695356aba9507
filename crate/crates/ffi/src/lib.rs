//! C ABI for `gnperc`.
//!
//! Every fallible function returns a [`GnStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and
//! can be copied out with [`gn_last_error_message`]. Point sets and graphs
//! are opaque handles owned by the caller and released with their `_free`
//! function. Panics never cross the boundary; they surface as
//! `GN_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gnperc::clusters::{crossing_exists, label_clusters};
use gnperc::geometry::{knn_table, sample_poisson, BoxRegion, Metric, PointSet};
use gnperc::gnmodel::{
    build_graph, choose_kmax, connection_ranges, expected_range, AlphaSpec, GNGraph, Tail, Variant,
};
use gnperc::mc::{self, ExperimentSpec};
use gnperc::oned::{estimate_p_unbridged, PmConfig};
use gnperc::{renorm, sbp, stats, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidBox = 3,
    TruncatedTable = 4,
    InsufficientPoints = 5,
    Unsupported = 6,
    InfiniteRange = 7,
    Bracket = 8,
    Format = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnMetric {
    EuclideanFree = 0,
    Torus = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnVariant {
    ReachUnion = 0,
    BooleanOverlap = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnTailKind {
    None = 0,
    /// `coef · param^i` beyond the head.
    Geometric = 1,
    /// `coef · i^{-param}` beyond the head; closed forms only.
    PowerLaw = 2,
}

/// Weight vector: explicit head `α_1..α_K` plus an optional tail.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GnAlpha {
    pub head: *const f64,
    pub head_len: usize,
    pub tail_kind: GnTailKind,
    pub tail_coef: f64,
    pub tail_param: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GnCI {
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: u64,
    pub level: f64,
}

/// Crossing experiment. A NaN `margin` selects the default buffer.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GnExperiment {
    pub alpha: GnAlpha,
    pub dim: usize,
    pub variant: GnVariant,
    pub side: f64,
    pub density: f64,
    pub margin: f64,
    pub trials: u64,
    pub base_seed: u64,
    pub axis: usize,
    pub level: f64,
}

/// Opaque point set.
pub struct GnPointSet(PointSet);

/// Opaque GN graph.
pub struct GnGraph(GNGraph);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(GnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain { .. } => GnStatus::Domain,
            Error::InvalidBox(_) => GnStatus::InvalidBox,
            Error::TruncatedTable { .. } => GnStatus::TruncatedTable,
            Error::InsufficientPoints { .. } => GnStatus::InsufficientPoints,
            Error::Unsupported(_) => GnStatus::Unsupported,
            Error::InfiniteRange => GnStatus::InfiniteRange,
            Error::Bracket { .. } => GnStatus::Bracket,
            Error::Format(_) | Error::Json(_) => GnStatus::Format,
            Error::Io(_) => GnStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GnStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> GnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GnStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn alpha_spec(a: *const GnAlpha) -> Result<AlphaSpec, Fail> {
    let a = a.as_ref().ok_or_else(|| null("alpha"))?;
    let head = slice(a.head, a.head_len, "alpha.head")?.to_vec();
    let tail = match a.tail_kind {
        GnTailKind::None => Tail::None,
        GnTailKind::Geometric => Tail::Geometric {
            coef: a.tail_coef,
            gamma: a.tail_param,
        },
        GnTailKind::PowerLaw => Tail::PowerLaw {
            coef: a.tail_coef,
            exponent: a.tail_param,
        },
    };
    Ok(AlphaSpec::new(head, tail)?)
}

unsafe fn bbox(dim: usize, lower: *const f64, upper: *const f64) -> Result<BoxRegion, Fail> {
    let lo = slice(lower, dim, "lower")?.to_vec();
    let hi = slice(upper, dim, "upper")?.to_vec();
    Ok(BoxRegion::new(lo, hi)?)
}

fn metric(m: GnMetric) -> Metric {
    match m {
        GnMetric::EuclideanFree => Metric::EuclideanFree,
        GnMetric::Torus => Metric::Torus,
    }
}

fn variant(v: GnVariant) -> Variant {
    match v {
        GnVariant::ReachUnion => Variant::ReachUnion,
        GnVariant::BooleanOverlap => Variant::BooleanOverlap,
    }
}

fn ci(c: stats::CIEstimate) -> GnCI {
    GnCI {
        p_hat: c.p_hat,
        lower: c.lower,
        upper: c.upper,
        trials: c.trials,
        level: c.level,
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gn_version() -> *const c_char {
    concat!("gnperc ", env!("CARGO_PKG_VERSION"), "\0")
        .as_ptr()
        .cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn gn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Sample a homogeneous Poisson process on the box `[lower, upper]`.
#[no_mangle]
pub unsafe extern "C" fn gn_points_sample(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    density: f64,
    seed: u64,
    metric_kind: GnMetric,
    out_points: *mut *mut GnPointSet,
) -> GnStatus {
    guard(|| {
        let o = out(out_points, "out_points")?;
        let b = bbox(dim, lower, upper)?;
        let ps = sample_poisson(&b, density, seed, metric(metric_kind))?;
        *o = Box::into_raw(Box::new(GnPointSet(ps)));
        Ok(())
    })
}

/// Wrap `n` explicit points (`coords` holds `n * dim` values, point-major).
#[no_mangle]
pub unsafe extern "C" fn gn_points_from_coords(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    density: f64,
    coords: *const f64,
    n: usize,
    metric_kind: GnMetric,
    out_points: *mut *mut GnPointSet,
) -> GnStatus {
    guard(|| {
        let o = out(out_points, "out_points")?;
        let b = bbox(dim, lower, upper)?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Fail(GnStatus::Domain, "n * dim overflows".into()))?;
        let c = slice(coords, len, "coords")?.to_vec();
        let ps = PointSet::from_coords(b, density, c, metric(metric_kind), 0)?;
        *o = Box::into_raw(Box::new(GnPointSet(ps)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gn_points_len(points: *const GnPointSet) -> usize {
    points.as_ref().map_or(0, |p| p.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn gn_points_dim(points: *const GnPointSet) -> usize {
    points.as_ref().map_or(0, |p| p.0.dim())
}

/// Copy all coordinates into `buf`, which must hold `len * dim` values.
#[no_mangle]
pub unsafe extern "C" fn gn_points_copy_coords(
    points: *const GnPointSet,
    buf: *mut f64,
    buf_len: usize,
) -> GnStatus {
    guard(|| {
        let p = points.as_ref().ok_or_else(|| null("points"))?;
        let c = p.0.coords();
        if buf_len < c.len() {
            return Err(Fail(
                GnStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, {} needed", c.len()),
            ));
        }
        if !c.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gn_points_free(points: *mut GnPointSet) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

/// Build the GN graph of `points` under `alpha`.
#[no_mangle]
pub unsafe extern "C" fn gn_graph_build(
    points: *const GnPointSet,
    alpha: *const GnAlpha,
    variant_kind: GnVariant,
    out_graph: *mut *mut GnGraph,
) -> GnStatus {
    guard(|| {
        let o = out(out_graph, "out_graph")?;
        let p = &points.as_ref().ok_or_else(|| null("points"))?.0;
        let a = alpha_spec(alpha)?;
        let kmax = choose_kmax(&a, p.dim(), p.density())?;
        let table = knn_table(p, kmax)?;
        let ranges = connection_ranges(&table, &a)?;
        let g = build_graph(p, &ranges, variant(variant_kind))?;
        *o = Box::into_raw(Box::new(GnGraph(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gn_graph_edge_count(graph: *const GnGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edges().len())
}

/// Copy the undirected edges as `(u, v)` pairs, `u < v`, into `buf`,
/// which must hold `2 * edge_count` values.
#[no_mangle]
pub unsafe extern "C" fn gn_graph_copy_edges(
    graph: *const GnGraph,
    buf: *mut usize,
    buf_len: usize,
) -> GnStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let e = g.0.edges();
        if buf_len < 2 * e.len() {
            return Err(Fail(
                GnStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, {} needed", 2 * e.len()),
            ));
        }
        if e.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (i, &(u, v)) in e.iter().enumerate() {
            *buf.add(2 * i) = u;
            *buf.add(2 * i + 1) = v;
        }
        Ok(())
    })
}

/// Component label of every point (the smallest index in its component)
/// and the largest component's share of all points. `labels` may be null.
#[no_mangle]
pub unsafe extern "C" fn gn_graph_components(
    graph: *const GnGraph,
    labels: *mut usize,
    labels_len: usize,
    out_largest_fraction: *mut f64,
    out_component_count: *mut usize,
) -> GnStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let l = label_clusters(&g.0);
        if !labels.is_null() {
            if labels_len < l.labels.len() {
                return Err(Fail(
                    GnStatus::BufferTooSmall,
                    format!(
                        "buffer holds {labels_len} labels, {} needed",
                        l.labels.len()
                    ),
                ));
            }
            ptr::copy_nonoverlapping(l.labels.as_ptr(), labels, l.labels.len());
        }
        if let Some(f) = out_largest_fraction.as_mut() {
            *f = l.largest_fraction;
        }
        if let Some(c) = out_component_count.as_mut() {
            *c = l.component_count();
        }
        Ok(())
    })
}

/// Whether one component touches both faces of the inner box normal to
/// `axis`. `graph` must have been built from `points`.
#[no_mangle]
pub unsafe extern "C" fn gn_graph_crossing(
    graph: *const GnGraph,
    points: *const GnPointSet,
    inner_lower: *const f64,
    inner_upper: *const f64,
    axis: usize,
    out_crossing: *mut bool,
) -> GnStatus {
    guard(|| {
        let o = out(out_crossing, "out_crossing")?;
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let p = &points.as_ref().ok_or_else(|| null("points"))?.0;
        if g.0.len() != p.len() {
            return Err(Fail(
                GnStatus::Domain,
                "graph and point set differ in size".into(),
            ));
        }
        let inner = bbox(p.dim(), inner_lower, inner_upper)?;
        *o = crossing_exists(&label_clusters(&g.0), p, &inner, axis)?.crossing;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gn_graph_free(graph: *mut GnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Wilson score interval for `successes` out of `trials`.
#[no_mangle]
pub unsafe extern "C" fn gn_wilson_ci(
    successes: u64,
    trials: u64,
    level: f64,
    out_ci: *mut GnCI,
) -> GnStatus {
    guard(|| {
        let o = out(out_ci, "out_ci")?;
        *o = ci(stats::wilson_ci(successes, trials, level)?);
        Ok(())
    })
}

/// `E[r(0)]`; `INFINITY` when the mean diverges.
#[no_mangle]
pub unsafe extern "C" fn gn_expected_range(
    alpha: *const GnAlpha,
    dim: usize,
    density: f64,
    out_value: *mut f64,
) -> GnStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        let a = alpha_spec(alpha)?;
        *o = expected_range(&a, dim, density)?
            .finite()
            .unwrap_or(f64::INFINITY);
        Ok(())
    })
}

/// `ñ(p_c)` and the bound `ñ√45` on the 2D critical multiplier.
#[no_mangle]
pub unsafe extern "C" fn gn_renorm_bound(
    pc: f64,
    out_n_tilde: *mut usize,
    out_bound: *mut f64,
) -> GnStatus {
    guard(|| {
        let n = out(out_n_tilde, "out_n_tilde")?;
        let b = out(out_bound, "out_bound")?;
        *n = renorm::n_tilde(pc)?;
        *b = renorm::alpha_bound_2d(pc)?;
        Ok(())
    })
}

/// Probability `δ^d e^{-(3δ)^d}` that a `3δ` box is a banana box at unit
/// density.
#[no_mangle]
pub extern "C" fn gn_banana_prob(delta: f64, dim: usize) -> f64 {
    renorm::banana_prob(delta, dim)
}

/// `δ₁` with `E[min(Poisson((1+δ₁)^d), c₂)] = c₁`.
#[no_mangle]
pub unsafe extern "C" fn gn_calibrate_delta1(
    dim: usize,
    c1: f64,
    c2: u32,
    out_delta1: *mut f64,
) -> GnStatus {
    guard(|| {
        let o = out(out_delta1, "out_delta1")?;
        *o = sbp::calibrate_delta1(dim, c1, c2)?;
        Ok(())
    })
}

/// Crossing probability of the experiment over `trials` independent windows.
#[no_mangle]
pub unsafe extern "C" fn gn_crossing_probability(
    spec: *const GnExperiment,
    out_ci: *mut GnCI,
) -> GnStatus {
    guard(|| {
        let o = out(out_ci, "out_ci")?;
        let s = spec.as_ref().ok_or_else(|| null("spec"))?;
        let es = ExperimentSpec {
            alpha: alpha_spec(&s.alpha)?,
            dim: s.dim,
            variant: variant(s.variant),
            side: s.side,
            density: s.density,
            margin: (!s.margin.is_nan()).then_some(s.margin),
            trials: s.trials,
            base_seed: s.base_seed,
            axis: s.axis,
            level: s.level,
        };
        let results = mc::run_trials(&es, None)?;
        let hits = results.iter().filter(|r| r.crossing).count() as u64;
        *o = ci(stats::wilson_ci(hits, results.len() as u64, es.level)?);
        Ok(())
    })
}

/// Probability that an `m`-gap of the unit-rate line process is unbridged
/// from the right, from `trials` windows of length `window`.
#[no_mangle]
pub unsafe extern "C" fn gn_p_unbridged(
    alpha: *const GnAlpha,
    m: f64,
    trials: u64,
    window: f64,
    density: f64,
    seed: u64,
    level: f64,
    out_ci: *mut GnCI,
) -> GnStatus {
    guard(|| {
        let o = out(out_ci, "out_ci")?;
        let cfg = PmConfig {
            alpha: alpha_spec(alpha)?,
            m,
            trials,
            window,
            density,
            seed,
            level,
        };
        *o = ci(estimate_p_unbridged(&cfg)?.ci);
        Ok(())
    })
}
