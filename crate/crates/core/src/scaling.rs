//! The phase-space scaling map `Λ_a: P(z) -> P(z/a)/a^2` per mode, its dual,
//! detection of non-classicality through it, and coherent-projector witnesses.
//!
//! In the Fock basis `Λ_a` is the binomial attenuation formula with
//! transmittance `a^2`, continued to `a > 1`. It only lowers photon numbers,
//! so it is exact on any operator whose support fits the cutoff.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::depth::{self, global_min, MinSearchConfig, Objective};
use crate::error::{Error, Result};
use crate::fock::{coherent_ket, CoherentPoint, FockOperator, C64};
use crate::quasiprob::{CharPoly, Regularize};
use crate::state::BosonicState;
use crate::util::binomial;

/// Tail-inflation gate for `Λ_a` applied to truncated states.
pub const INFLATION_LIMIT: f64 = 1e-6;
/// Strict negativity threshold for a detection.
pub const DETECTION_TOL: f64 = 1e-12;

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("scaling parameter a must be > 0, got {a}")));
    }
    Ok(())
}

/// `sqrt(C(m,k) C(n,k)) a^{m+n-2k} (1-a^2)^k`
fn weight(m: usize, n: usize, k: usize, a: f64) -> f64 {
    (binomial(m, k) * binomial(n, k)).sqrt() * a.powi((m + n - 2 * k) as i32) * (1.0 - a * a).powi(k as i32)
}

/// Accumulates `value * prod_i terms_i` into `out`, where each mode offers a
/// list of `(row_index, col_index, factor)`.
fn scatter(dims: &[usize], per_mode: &[Vec<(usize, usize, f64)>], value: C64, out: &mut DMatrix<C64>) {
    if per_mode.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    loop {
        let (mut r, mut c, mut f) = (0usize, 0usize, 1.0);
        for (i, &j) in idx.iter().enumerate() {
            let (rr, cc, w) = per_mode[i][j];
            r = r * dims[i] + rr;
            c = c * dims[i] + cc;
            f *= w;
        }
        out[(r, c)] += value * f;
        let mut mode = dims.len();
        loop {
            if mode == 0 {
                return;
            }
            mode -= 1;
            idx[mode] += 1;
            if idx[mode] < per_mode[mode].len() {
                break;
            }
            idx[mode] = 0;
        }
    }
}

/// `Λ_a` on every mode: `|m><n| -> sum_k sqrt(C(m,k)C(n,k)) a^{m+n-2k} (1-a^2)^k |m-k><n-k|`.
pub fn lambda_map(rho: &FockOperator, a: f64) -> Result<FockOperator> {
    check_a(a)?;
    let dims = rho.dims().to_vec();
    let mut out = DMatrix::zeros(rho.size(), rho.size());
    for (r, c, v) in rho.nonzeros() {
        let (rm, cm) = (rho.multi_index(r), rho.multi_index(c));
        let per_mode: Vec<Vec<(usize, usize, f64)>> = rm
            .iter()
            .zip(&cm)
            .map(|(&m, &n)| (0..=m.min(n)).map(|k| (m - k, n - k, weight(m, n, k, a))).collect())
            .collect();
        scatter(&dims, &per_mode, v, &mut out);
    }
    FockOperator::new(dims, out)
}

/// Frobenius norm of `Λ_a` applied to the outermost Fock shell (entries
/// with any index at the cutoff). Zero for states with empty headroom.
pub fn tail_inflation(rho: &FockOperator, a: f64) -> Result<f64> {
    check_a(a)?;
    let dims = rho.dims().to_vec();
    let mut shell = DMatrix::zeros(rho.size(), rho.size());
    let mut any = false;
    for (r, c, v) in rho.nonzeros() {
        let at_edge = |idx: Vec<usize>| idx.iter().zip(&dims).any(|(i, d)| *i + 1 == *d);
        if at_edge(rho.multi_index(r)) || at_edge(rho.multi_index(c)) {
            shell[(r, c)] = v;
            any = true;
        }
    }
    if !any {
        return Ok(0.0);
    }
    Ok(lambda_map(&FockOperator::new(dims, shell)?, a)?.frobenius_norm())
}

/// Trace-adjoint of [`lambda_map`] on the same truncated space:
/// `Tr[rho dual(X)] = Tr[Λ_a(rho) X]`.
pub fn dual_lambda(x: &FockOperator, a: f64) -> Result<FockOperator> {
    check_a(a)?;
    let dims = x.dims().to_vec();
    let mut out = DMatrix::zeros(x.size(), x.size());
    for (r, c, v) in x.nonzeros() {
        let (rm, cm) = (x.multi_index(r), x.multi_index(c));
        let per_mode: Vec<Vec<(usize, usize, f64)>> = rm
            .iter()
            .zip(&cm)
            .zip(&dims)
            .map(|((&p, &q), &d)| (0..d - p.max(q)).map(|k| (p + k, q + k, weight(p + k, q + k, k, a))).collect())
            .collect();
        scatter(&dims, &per_mode, v, &mut out);
    }
    FockOperator::new(dims, out)
}

/// `chi_{Λ_a rho}(beta) = chi_rho(a beta)`.
pub fn char_scaled(rho: &FockOperator, a: f64, beta: &CoherentPoint) -> Result<C64> {
    check_a(a)?;
    CharPoly::from_operator(rho).eval(&beta.scaled(a))
}

/// `<beta| Λ_a rho |beta>`, exact on both Fock and analytic parts.
pub fn scaled_expectation(state: &BosonicState, a: f64, beta: &CoherentPoint) -> Result<f64> {
    check_a(a)?;
    state.lambda_map(a)?.0.coherent_expectation(beta)
}

/// Parameters of the witness `W = Λ_a*(|beta><beta|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSpec {
    pub a: f64,
    pub beta: CoherentPoint,
    pub dims: Vec<usize>,
}

impl WitnessSpec {
    pub fn new(a: f64, beta: CoherentPoint, dims: Vec<usize>) -> Result<Self> {
        check_a(a)?;
        if dims.len() != beta.modes() {
            return Err(Error::ModeMismatch { expected: beta.modes(), got: dims.len() });
        }
        if dims.iter().any(|d| *d < 2) {
            return Err(Error::DimensionMismatch("witness cutoffs must be >= 2".into()));
        }
        Ok(Self { a, beta, dims })
    }

    /// Spec sized for a state: its Fock cutoffs plus two headroom levels.
    pub fn for_state(state: &BosonicState, a: f64, beta: CoherentPoint) -> Result<Self> {
        let base: Vec<usize> = match state.fock_part() {
            Some(op) => op.dims().to_vec(),
            None => vec![crate::state::DEFAULT_DIM_SINGLE.min(12); state.modes()],
        };
        Self::new(a, beta, base.iter().map(|d| d + 2).collect())
    }
}

/// Materialised witness operator (Hermitian).
pub fn witness(spec: &WitnessSpec) -> Result<FockOperator> {
    let ket = coherent_ket(&spec.beta, &spec.dims)?;
    dual_lambda(&FockOperator::projector(spec.dims.clone(), &ket)?, spec.a)
}

/// `Tr[rho W]` for a witness spec: the Fock part against the materialised
/// witness, analytic components through `<beta|Λ_a(.)|beta>`.
pub fn witness_expectation(state: &BosonicState, spec: &WitnessSpec) -> Result<f64> {
    spec.beta.check_modes(state.modes())?;
    let mut total = 0.0;
    if let Some(op) = state.fock_part() {
        if op.dims().iter().zip(&spec.dims).any(|(s, w)| s > w) {
            return Err(Error::DimensionMismatch(format!(
                "witness cutoffs {:?} below state cutoffs {:?}",
                spec.dims,
                op.dims()
            )));
        }
        let w = witness(spec)?;
        total += (op.embed(&spec.dims)?.matrix() * w.matrix()).trace().re;
    }
    for c in state.components() {
        total += PI * c.dilate(spec.a)?.regularize(1.0)?.eval(&spec.beta)?;
    }
    Ok(total)
}

/// Search settings for [`detect`].
#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub search: MinSearchConfig,
    /// First grid point is `start_factor / sqrt(tau_m)`.
    pub start_factor: f64,
    pub ratio: f64,
    pub a_max: f64,
    /// First point of the grid used when the depth is unavailable.
    pub fallback_start: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { search: MinSearchConfig::default(), start_factor: 1.08, ratio: 1.15, a_max: 4.0, fallback_start: 1.1 }
    }
}

/// Outcome of a detection search.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub found: bool,
    pub a_used: Option<f64>,
    /// `[re, im, ..]` of the coherent point.
    pub beta_used: Option<Vec<f64>>,
    /// `<beta|Λ_a rho|beta>`, negative on success.
    pub expectation: Option<f64>,
    /// `1/sqrt(tau_m)` when the depth is known and positive.
    pub a_bound: Option<f64>,
    pub tau_m: Option<f64>,
    pub tail_inflation: f64,
    pub reliable: bool,
    pub a_tried: Vec<f64>,
}

/// Most negative `<beta|Λ_a rho|beta>` found at a fixed `a`, with the
/// tail-inflation measure.
pub fn minimize_at(state: &BosonicState, a: f64, search: &MinSearchConfig) -> Result<(f64, CoherentPoint, f64)> {
    let (mapped, inflation) = state.lambda_map(a)?;
    let density = mapped.regularize(1.0)?;
    let normalized = global_min(&density, search, Objective::Normalized)?;
    let raw = global_min(&density, search, Objective::Raw)?;
    let best = if normalized.raw <= raw.raw { normalized } else { raw };
    Ok((PI * best.raw, best.point, inflation))
}

/// Single-`a` detection.
pub fn detect_at(state: &BosonicState, a: f64, search: &MinSearchConfig) -> Result<DetectionReport> {
    check_a(a)?;
    let (value, point, inflation) = minimize_at(state, a, search)?;
    let found = value < -DETECTION_TOL;
    Ok(DetectionReport {
        found,
        a_used: Some(a),
        beta_used: Some(point.to_re_im()),
        expectation: Some(value),
        a_bound: None,
        tau_m: None,
        tail_inflation: inflation,
        reliable: inflation <= INFLATION_LIMIT,
        a_tried: vec![a],
    })
}

/// Searches a geometric `a` grid starting just above `1/sqrt(tau_m)` for a
/// coherent point where `Λ_a rho` has a negative diagonal element.
pub fn detect(state: &BosonicState, cfg: &DetectConfig) -> Result<DetectionReport> {
    let depth = depth::depth(state, &cfg.search).ok();
    let mut report = DetectionReport {
        found: false,
        a_used: None,
        beta_used: None,
        expectation: None,
        a_bound: None,
        tau_m: depth.as_ref().map(|d| d.tau_m),
        tail_inflation: 0.0,
        reliable: true,
        a_tried: Vec::new(),
    };
    let start = match &depth {
        Some(d) if d.tau_m == 0.0 => return Ok(report),
        Some(d) => {
            report.a_bound = Some(1.0 / d.tau_m.sqrt());
            cfg.start_factor / d.tau_m.sqrt()
        }
        None => cfg.fallback_start,
    };
    let mut a = start;
    while a <= cfg.a_max * (1.0 + 1e-12) {
        let (value, point, inflation) = minimize_at(state, a, &cfg.search)?;
        report.a_tried.push(a);
        report.tail_inflation = report.tail_inflation.max(inflation);
        if inflation > INFLATION_LIMIT {
            report.reliable = false;
        }
        if value < -DETECTION_TOL {
            report.found = true;
            report.a_used = Some(a);
            report.beta_used = Some(point.to_re_im());
            report.expectation = Some(value);
            break;
        }
        a *= cfg.ratio;
    }
    Ok(report)
}
