//! Non-classicality depth: the smallest Gaussian smoothing width that makes
//! the P distribution non-negative.
//!
//! Positivity of a regularised distribution is decided by a deterministic
//! multistart search followed by BFGS refinement. The search runs on a
//! normalised objective: the distribution divided by its widest Gaussian
//! envelope and by `(1 + |z|^2)^{D/2}` for the largest polynomial degree `D`.
//! The sign is unchanged, but negative lobes that drift to large radius near
//! the depth threshold keep an O(1) magnitude instead of vanishing under the
//! envelope, and the objective stays bounded at infinity.

pub mod optim;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{CoherentPoint, FockOperator, C64};
use crate::quasiprob::{CharPoly, Density, PolyGaussian, Regularize};

pub const DEFAULT_SEED: u64 = 0xB0C4;

/// Search and bisection settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MinSearchConfig {
    /// Geometric radial rings between `inner_radius` and `outer_radius` (in units of the envelope width).
    pub rings: usize,
    /// Starts per ring and mode.
    pub phases: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Number of best starts handed to BFGS.
    pub refine: usize,
    pub max_iter: usize,
    /// Positivity tolerance on the normalised objective.
    pub abs_tol: f64,
    pub bisection_tol: f64,
    pub tau_max: f64,
    pub seed: u64,
}

impl Default for MinSearchConfig {
    fn default() -> Self {
        Self {
            rings: 16,
            phases: 8,
            inner_radius: 0.05,
            outer_radius: 100.0,
            refine: 32,
            max_iter: 200,
            abs_tol: 1e-10,
            bisection_tol: 1e-4,
            tau_max: 4.0,
            seed: DEFAULT_SEED,
        }
    }
}

impl MinSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.inner_radius, self.outer_radius, self.abs_tol, self.bisection_tol, self.tau_max];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("search radii and tolerances must be finite and > 0".into()));
        }
        if self.rings < 2 || self.phases == 0 || self.refine == 0 {
            return Err(Error::InvalidParameter("need at least 2 rings, 1 phase and 1 refinement".into()));
        }
        if self.inner_radius >= self.outer_radius {
            return Err(Error::InvalidParameter("inner radius must be below outer radius".into()));
        }
        Ok(())
    }
}

/// Which quantity the multistart search minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Sign-preserving normalised value, used for positivity decisions.
    Normalized,
    /// The distribution itself.
    Raw,
}

/// Global minimum estimate of a distribution.
#[derive(Debug, Clone)]
pub struct MinResult {
    /// Minimised objective value.
    pub value: f64,
    /// Distribution value at `point`.
    pub raw: f64,
    pub point: CoherentPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModeVar {
    /// Depends on `|z|` only.
    Radial,
    /// Phase fixed by a global rotation symmetry.
    Real,
    Complex,
}

/// Coordinates actually searched, after phase-symmetry reduction.
#[derive(Debug, Clone)]
struct Layout(Vec<ModeVar>);

impl Layout {
    fn of(density: &Density) -> Self {
        let modes = density.modes();
        let parts = density.parts();
        if parts.iter().any(|p| !p.is_centered()) {
            return Self(vec![ModeVar::Complex; modes]);
        }
        let keys = || parts.iter().flat_map(|p| p.coeffs().keys());
        let mut vars: Vec<ModeVar> = (0..modes)
            .map(|i| if keys().all(|k| k[2 * i] == k[2 * i + 1]) { ModeVar::Radial } else { ModeVar::Complex })
            .collect();
        // a joint rotation z_i -> e^{i s_i phi} z_i (s_i = +-1 on non-radial
        // modes) leaves every monomial invariant: fix one phase
        let free: Vec<usize> = (0..modes).filter(|&i| vars[i] == ModeVar::Complex).collect();
        if let Some(&first) = free.first() {
            let patterns = 1usize << (free.len() - 1).min(8);
            let invariant = (0..patterns).any(|bits| {
                keys().all(|k| {
                    free.iter()
                        .enumerate()
                        .map(|(j, &i)| {
                            let s = if j > 0 && bits >> (j - 1) & 1 == 1 { -1 } else { 1 };
                            s * (k[2 * i] as i64 - k[2 * i + 1] as i64)
                        })
                        .sum::<i64>()
                        == 0
                })
            });
            if invariant {
                vars[first] = ModeVar::Real;
            }
        }
        Self(vars)
    }

    fn dim(&self) -> usize {
        self.0.iter().map(|v| if *v == ModeVar::Complex { 2 } else { 1 }).sum()
    }

    fn point(&self, x: &[f64]) -> Vec<C64> {
        let mut it = x.iter();
        self.0
            .iter()
            .map(|v| match v {
                ModeVar::Complex => C64::new(*it.next().unwrap(), *it.next().unwrap()),
                _ => C64::new(*it.next().unwrap(), 0.0),
            })
            .collect()
    }

    fn coords(&self, z: &[C64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for (v, c) in self.0.iter().zip(z) {
            match v {
                ModeVar::Complex => {
                    x.push(c.re);
                    x.push(c.im);
                }
                ModeVar::Radial => x.push(c.norm()),
                ModeVar::Real => x.push(c.re),
            }
        }
        x
    }
}

struct Evaluator<'a> {
    parts: &'a [PolyGaussian],
    tau_ref: f64,
    half_degree: i32,
    log_weights: Vec<f64>,
    objective: Objective,
}

impl<'a> Evaluator<'a> {
    fn new(density: &'a Density, objective: Objective) -> Self {
        let parts = density.parts();
        let tau_ref = parts.iter().map(PolyGaussian::tau).fold(0.0, f64::max);
        let degree = parts.iter().map(PolyGaussian::degree).max().unwrap_or(0);
        let m = density.modes() as f64;
        let log_weights = parts.iter().map(|p| m * (tau_ref / p.tau()).ln()).collect();
        Self { parts, tau_ref, half_degree: degree.div_ceil(2) as i32, log_weights, objective }
    }

    fn raw(&self, z: &[C64]) -> f64 {
        self.parts.iter().map(|p| (p.poly_value(z) * p.log_envelope(z).exp()).re).sum()
    }

    fn normalized(&self, z: &[C64]) -> f64 {
        let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let logs: Vec<f64> = self
            .parts
            .iter()
            .zip(&self.log_weights)
            .map(|(p, w)| {
                let d2: f64 = z.iter().zip(p.center()).map(|(a, b)| (a - b).norm_sqr()).sum();
                w - d2 / p.tau() + r2 / self.tau_ref
            })
            .collect();
        let shift = logs.iter().cloned().fold(0.0, f64::max);
        let sum: f64 = self.parts.iter().zip(&logs).map(|(p, l)| p.poly_value(z).re * (l - shift).exp()).sum();
        sum / (1.0 + r2).powi(self.half_degree)
    }

    fn value(&self, z: &[C64]) -> f64 {
        match self.objective {
            Objective::Normalized => self.normalized(z),
            Objective::Raw => self.raw(z),
        }
    }
}

fn start_points(density: &Density, layout: &Layout, cfg: &MinSearchConfig) -> Vec<Vec<f64>> {
    let n = layout.dim();
    let scale = density.parts().iter().map(PolyGaussian::tau).fold(f64::INFINITY, f64::min).sqrt();
    let mut starts = vec![vec![0.0; n]];
    for p in density.parts() {
        if !p.is_centered() {
            starts.push(layout.coords(p.center()));
        }
    }
    let ratio = (cfg.outer_radius / cfg.inner_radius).powf(1.0 / (cfg.rings - 1) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for ring in 0..cfg.rings {
        let r = scale * cfg.inner_radius * ratio.powi(ring as i32);
        match n {
            1 => {
                starts.push(vec![r]);
                starts.push(vec![-r]);
            }
            2 => {
                for j in 0..cfg.phases {
                    let t = 2.0 * PI * (j as f64 + 0.5 * (ring % 2) as f64) / cfg.phases as f64;
                    starts.push(vec![r * t.cos(), r * t.sin()]);
                }
            }
            _ => {
                for _ in 0..cfg.phases * layout.0.len() {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    starts.push(v.iter().map(|x| r * x / norm).collect());
                }
                // each mode on its own axis
                for i in 0..n {
                    let mut v = vec![0.0; n];
                    v[i] = r;
                    starts.push(v);
                }
            }
        }
    }
    starts
}

/// Multistart global minimisation of a distribution.
pub fn global_min(density: &Density, cfg: &MinSearchConfig, objective: Objective) -> Result<MinResult> {
    cfg.validate()?;
    if density.is_empty() {
        return Err(Error::Degenerate("distribution has no coefficients".into()));
    }
    let layout = Layout::of(density);
    let eval = Evaluator::new(density, objective);
    let f = |x: &[f64]| eval.value(&layout.point(x));
    let starts = start_points(density, &layout, cfg);
    let mut scored: Vec<(f64, usize)> = starts.par_iter().enumerate().map(|(i, x)| (f(x), i)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let scale = density.parts().iter().map(PolyGaussian::tau).fold(f64::INFINITY, f64::min).sqrt();
    let refined: Vec<(f64, usize, Vec<f64>)> = scored
        .par_iter()
        .take(cfg.refine)
        .map(|&(v, i)| {
            let local = optim::bfgs(f, &starts[i], scale, cfg.max_iter);
            if local.value.is_finite() && local.value < v {
                (local.value, i, local.x)
            } else {
                (v, i, starts[i].clone())
            }
        })
        .collect();
    let (value, _, x) =
        refined.into_iter().min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))).expect("at least one start");
    let z = layout.point(&x);
    Ok(MinResult { value, raw: eval.raw(&z), point: CoherentPoint(z) })
}

/// Outcome of a positivity test at one smoothing width.
#[derive(Debug, Clone)]
pub struct Regularization {
    pub tau: f64,
    pub regularized: bool,
    /// Minimum found; absent when positivity is manifest from the coefficients.
    pub minimum: Option<MinResult>,
}

/// Whether `R_tau[P] >= -abs_tol` everywhere (on the normalised scale).
pub fn is_regularized<R: Regularize + ?Sized>(state: &R, tau: f64, cfg: &MinSearchConfig) -> Result<Regularization> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    let density = state.regularize(tau)?;
    if density.is_manifestly_nonnegative() {
        return Ok(Regularization { tau, regularized: true, minimum: None });
    }
    let min = global_min(&density, cfg, Objective::Normalized)?;
    Ok(Regularization { tau, regularized: min.value >= -cfg.abs_tol, minimum: Some(min) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthStatus {
    Classical,
    Nonclassical,
    NonpositiveSuspect,
}

/// Depth with its bracket and a point where the distribution at the lower
/// end of the bracket is negative.
#[derive(Debug, Clone)]
pub struct DepthResult {
    pub tau_m: f64,
    pub bracket: (f64, f64),
    pub witness: Option<CoherentPoint>,
    /// Normalised objective at the witness (negative).
    pub witness_value: Option<f64>,
    pub status: DepthStatus,
    /// Set when the state is not regularised even at `tau_max`; `tau_m` is then a lower bound.
    pub lower_bound_only: bool,
}

impl Serialize for DepthResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(6))?;
        map.serialize_entry("tau_m", &self.tau_m)?;
        map.serialize_entry("bracket", &[self.bracket.0, self.bracket.1])?;
        map.serialize_entry("status", &self.status)?;
        map.serialize_entry("witness", &self.witness.as_ref().map(CoherentPoint::to_re_im))?;
        map.serialize_entry("witness_value", &self.witness_value)?;
        map.serialize_entry("lower_bound_only", &self.lower_bound_only)?;
        map.end()
    }
}

/// Bisection for the non-classicality depth on `[0, tau_max]`.
///
/// `tau = 1` is always probed as a pivot so that the status reflects whether
/// the Husimi function itself is non-negative.
pub fn depth<R: Regularize + ?Sized>(state: &R, cfg: &MinSearchConfig) -> Result<DepthResult> {
    cfg.validate()?;
    let tol = cfg.bisection_tol;
    let at_tol = is_regularized(state, tol, cfg)?;
    if at_tol.regularized {
        return Ok(DepthResult {
            tau_m: 0.0,
            bracket: (0.0, tol),
            witness: None,
            witness_value: None,
            status: DepthStatus::Classical,
            lower_bound_only: false,
        });
    }
    let mut witness = at_tol.minimum;
    let top = is_regularized(state, cfg.tau_max, cfg)?;
    if !top.regularized {
        let w = top.minimum;
        return Ok(DepthResult {
            tau_m: cfg.tau_max,
            bracket: (cfg.tau_max, f64::INFINITY),
            witness_value: w.as_ref().map(|m| m.value),
            witness: w.map(|m| m.point),
            status: DepthStatus::NonpositiveSuspect,
            lower_bound_only: true,
        });
    }
    let (mut lo, mut hi) = (tol, cfg.tau_max);
    let mut husimi_positive = cfg.tau_max <= 1.0;
    if lo < 1.0 && 1.0 < hi {
        let pivot = is_regularized(state, 1.0, cfg)?;
        if pivot.regularized {
            hi = 1.0;
            husimi_positive = true;
        } else {
            lo = 1.0;
            witness = pivot.minimum;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = is_regularized(state, mid, cfg)?;
        if r.regularized {
            hi = mid;
        } else {
            lo = mid;
            witness = r.minimum;
        }
    }
    let status = if husimi_positive { DepthStatus::Nonclassical } else { DepthStatus::NonpositiveSuspect };
    Ok(DepthResult {
        tau_m: 0.5 * (lo + hi),
        bracket: (lo, hi),
        witness_value: witness.as_ref().map(|m| m.value),
        witness: witness.map(|m| m.point),
        status,
        lower_bound_only: false,
    })
}

/// Evidence that an operator is not positive semidefinite.
#[derive(Debug, Clone, Serialize)]
pub struct NonpositiveCertificate {
    pub depth: DepthResult,
    pub min_eigenvalue: f64,
    /// Eigenvector of the smallest eigenvalue as `[re, im]` pairs.
    pub eigenvector: Vec<[f64; 2]>,
    /// True when a negative eigenvalue was found.
    pub certified: bool,
}

/// Negative-spectrum certificate backed by the depth computation. A state
/// that fails to regularise at the Husimi level while its spectrum is
/// non-negative is reported as a truncation artifact.
pub fn certify_nonpositive(rho: &FockOperator, cfg: &MinSearchConfig) -> Result<NonpositiveCertificate> {
    rho.require_hermitian()?;
    rho.require_unit_trace()?;
    let spectrum = rho.eigen_hermitian()?;
    let min_eigenvalue = spectrum.min();
    let v = spectrum.vectors.column(0);
    let eigenvector = v.iter().map(|c| [c.re, c.im]).collect();
    let depth = depth(rho, cfg)?;
    let negative = min_eigenvalue < -1e-12;
    if depth.status == DepthStatus::NonpositiveSuspect && !negative {
        return Err(Error::TruncationArtifact(format!(
            "distribution not regularised at tau >= 1 but smallest eigenvalue is {min_eigenvalue:e}"
        )));
    }
    Ok(NonpositiveCertificate { depth, min_eigenvalue, eigenvector, certified: negative })
}

/// Sample points for the positive-definiteness check: a golden-angle spiral
/// in a disk, independently rotated per mode.
pub fn bochner_points(modes: usize, radius: f64, count: usize, seed: u64) -> Vec<CoherentPoint> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotations: Vec<f64> = (0..modes).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    (0..count)
        .map(|j| {
            CoherentPoint(
                (0..modes)
                    .map(|i| {
                        let idx = (j * (2 * i + 1)) % count;
                        let r = radius * ((idx as f64 + 0.5) / count as f64).sqrt();
                        C64::from_polar(r, idx as f64 * golden + rotations[i])
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Necessary condition for `R_tau[P] >= 0`: the Gram matrix of
/// `K_tau(beta) = e^{-tau|beta|^2} chi(beta)` on sample points is positive
/// semidefinite up to `1e-8` relative to its spectral norm.
pub fn bochner_check(rho: &FockOperator, tau: f64, samples: usize, seed: u64) -> Result<bool> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 sample points".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    let chi = CharPoly::from_operator(rho);
    let pts = bochner_points(rho.modes(), 3.0 / tau.sqrt(), samples, seed);
    let mut gram = nalgebra::DMatrix::<C64>::zeros(samples, samples);
    for j in 0..samples {
        for k in 0..samples {
            let d = CoherentPoint(pts[j].0.iter().zip(&pts[k].0).map(|(a, b)| a - b).collect());
            gram[(j, k)] = chi.eval(&d)? * (-tau * d.norm_sqr()).exp();
        }
    }
    let eig = FockOperator::new(vec![samples], gram)?.eigen_hermitian()?;
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(eig.min() >= -1e-8 * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::library;

    fn number(n: usize) -> FockOperator {
        let mut d = vec![0.0; n + 2];
        d[n] = 1.0;
        FockOperator::from_diagonal(vec![n + 2], &d).unwrap()
    }

    #[test]
    fn single_photon_minimum_at_origin() {
        let pg = crate::quasiprob::regularize(&number(1), 0.5).unwrap();
        let m = global_min(&pg.into(), &MinSearchConfig::default(), Objective::Raw).unwrap();
        assert!((m.value + 2.0 / PI).abs() < 1e-9, "{}", m.value);
        assert!(m.point.norm_sqr() < 1e-8);
    }

    #[test]
    fn vacuum_minimum_is_nonnegative() {
        let pg = crate::quasiprob::regularize(&number(0), 0.3).unwrap();
        let m = global_min(&pg.into(), &MinSearchConfig::default(), Objective::Raw).unwrap();
        assert!(m.value >= 0.0);
    }

    #[test]
    fn single_photon_regularisation_threshold() {
        let cfg = MinSearchConfig::default();
        let r = is_regularized(&number(1), 0.999, &cfg).unwrap();
        assert!(!r.regularized);
        assert!(r.minimum.unwrap().point.norm_sqr() < 1e-6);
        assert!(is_regularized(&number(1), 1.0, &cfg).unwrap().regularized);
    }

    #[test]
    fn single_photon_depth() {
        let d = depth(&number(1), &MinSearchConfig::default()).unwrap();
        assert!((d.tau_m - 1.0).abs() < 1e-3);
        assert_eq!(d.status, DepthStatus::Nonclassical);
        assert!(d.bracket.1 - d.bracket.0 <= 1e-4);
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["status"], "nonclassical");
    }

    #[test]
    fn classical_states_have_zero_depth() {
        let cfg = MinSearchConfig::default();
        let thermal = library::thermal(0.5).unwrap();
        assert_eq!(depth(&thermal, &cfg).unwrap().status, DepthStatus::Classical);
        let coh = library::coherent(C64::new(1.0, 0.0));
        assert!(is_regularized(&coh, 0.01, &cfg).unwrap().regularized);
        assert_eq!(depth(&coh, &cfg).unwrap().tau_m, 0.0);
    }

    #[test]
    fn diosi_depth_is_one() {
        let d = depth(&library::diosi(), &MinSearchConfig::default()).unwrap();
        assert!((d.tau_m - 1.0).abs() < 1e-3, "{}", d.tau_m);
    }

    #[test]
    fn layout_reduces_symmetric_modes() {
        let pg = crate::quasiprob::regularize(&number(2), 0.5).unwrap();
        assert_eq!(Layout::of(&pg.into()).0, vec![ModeVar::Radial]);
    }

    #[test]
    fn werner_layout_has_three_variables() {
        let w = crate::entanglement::werner_state(0.5, 2).unwrap();
        let layout = Layout::of(&crate::quasiprob::regularize(&w, 0.6).unwrap().into());
        assert_eq!(layout.0, vec![ModeVar::Real, ModeVar::Complex]);
        assert_eq!(layout.dim(), 3);
    }

    #[test]
    fn bochner_examples() {
        assert!(bochner_check(&number(0), 0.5, 64, DEFAULT_SEED).unwrap());
        assert!(!bochner_check(&number(1), 0.5, 64, DEFAULT_SEED).unwrap());
        assert!(bochner_check(&number(1), 0.5, 1, 0).is_err());
    }

    #[test]
    fn physical_state_not_certified() {
        let cert = certify_nonpositive(&number(1), &MinSearchConfig::default()).unwrap();
        assert!(!cert.certified);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = MinSearchConfig { abs_tol: 0.0, ..Default::default() };
        assert!(depth(&number(1), &cfg).is_err());
    }
}
