//! Partial-transpose separability, the Werner family, the classical
//! two-mode ansatz and the entanglement depth `N_e = tau_m[rho] - tau_m[rho_s]`,
//! where `rho_s` is the least classical admixture that makes `rho` PPT.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::depth::{depth, global_min, MinSearchConfig, Objective};
use crate::error::{Error, Result};
use crate::fock::{coupled_blocks, hermitian_eigenvalues_blocked, FockOperator, C64};
use crate::quasiprob::{regularize, Density, PolyGaussian};
use crate::state::{BosonicState, PComponent};

/// Default per-mode cutoff for Werner states.
pub const WERNER_DIMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerParams {
    pub p: f64,
    pub dims: usize,
}

impl WernerParams {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_dims(p, WERNER_DIMS)
    }

    pub fn with_dims(p: f64, dims: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("Werner weight p = {p} outside [0, 1]")));
        }
        if dims < 2 {
            return Err(Error::DimensionMismatch("Werner cutoff must be >= 2".into()));
        }
        Ok(Self { p, dims })
    }

    pub fn state(&self) -> FockOperator {
        let d = self.dims;
        let mut m = DMatrix::zeros(d * d, d * d);
        let block = [0, 1, d, d + 1]; // |00>, |01>, |10>, |11>
        for &i in &block {
            m[(i, i)] = C64::new((1.0 - self.p) / 4.0, 0.0);
        }
        for &i in &[block[0], block[3]] {
            for &j in &[block[0], block[3]] {
                m[(i, j)] += C64::new(self.p / 2.0, 0.0);
            }
        }
        FockOperator::new(vec![d, d], m).expect("valid by construction")
    }
}

/// `p |phi+><phi+| + (1 - p) I/4` on the `{0,1}^2` block of a `dims x dims` space.
pub fn werner_state(p: f64, dims: usize) -> Result<FockOperator> {
    Ok(WernerParams::with_dims(p, dims)?.state())
}

fn require_two_mode(rho: &FockOperator) -> Result<()> {
    if rho.modes() != 2 {
        return Err(Error::ModeMismatch { expected: 2, got: rho.modes() });
    }
    Ok(())
}

/// Smallest eigenvalue of the partial transpose on the second mode.
pub fn min_pt_eigenvalue(rho: &FockOperator) -> Result<f64> {
    require_two_mode(rho)?;
    let pt = rho.partial_transpose(1)?;
    Ok(hermitian_eigenvalues_blocked(pt.matrix()).into_iter().fold(f64::INFINITY, f64::min))
}

/// `||rho^T_B||_1 - 1`: twice the summed magnitude of the negative
/// partial-transpose eigenvalues of a unit-trace state.
pub fn negativity(rho: &FockOperator) -> Result<f64> {
    require_two_mode(rho)?;
    rho.require_hermitian()?;
    rho.require_unit_trace()?;
    let pt = rho.partial_transpose(1)?;
    Ok(2.0 * hermitian_eigenvalues_blocked(pt.matrix()).into_iter().filter(|v| *v < 0.0).map(|v| -v).sum::<f64>())
}

/// Classical two-mode ansatz with
/// `P(z_A, z_B) = (|z_A|^2 + |z_B|^2) e^{-(|z_A|^2 + |z_B|^2)/tau} / (2 pi^2 tau^3)`.
pub fn sigma_state(tau_sigma: f64) -> Result<BosonicState> {
    check_tau_sigma(tau_sigma)?;
    let mut coeffs = BTreeMap::new();
    coeffs.insert(vec![1u16, 1, 0, 0], C64::new(0.5 / tau_sigma, 0.0));
    coeffs.insert(vec![0u16, 0, 1, 1], C64::new(0.5 / tau_sigma, 0.0));
    BosonicState::analytic(2, vec![PComponent::Smooth(PolyGaussian::new(2, tau_sigma, coeffs)?)])
}

/// Single-mode marginal of [`sigma_state`]: `(rho_1 + rho_th)/2` with the
/// one-photon-added thermal and thermal states of parameter `tau`.
pub fn sigma_marginal(tau_sigma: f64) -> Result<BosonicState> {
    check_tau_sigma(tau_sigma)?;
    let mut coeffs = BTreeMap::new();
    coeffs.insert(vec![0u16, 0], C64::new(0.5, 0.0));
    coeffs.insert(vec![1u16, 1], C64::new(0.5 / tau_sigma, 0.0));
    BosonicState::analytic(1, vec![PComponent::Smooth(PolyGaussian::new(1, tau_sigma, coeffs)?)])
}

fn check_tau_sigma(tau_sigma: f64) -> Result<()> {
    if !(tau_sigma > 0.0) || !tau_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("ansatz parameter must be > 0, got {tau_sigma}")));
    }
    Ok(())
}

/// The ansatz as a Fock-diagonal matrix, with its truncation tail mass.
#[derive(Debug, Clone)]
pub struct SigmaAnsatz {
    pub tau_sigma: f64,
    pub operator: FockOperator,
    pub tail_mass: f64,
}

/// Materialises the ansatz on `dims` (or the smallest cutoff meeting the
/// tail limit when `dims` is `None`).
pub fn sigma_ansatz(tau_sigma: f64, dims: Option<&[usize]>) -> Result<SigmaAnsatz> {
    let s = sigma_state(tau_sigma)?;
    let m = match dims {
        Some(d) => s.to_fock(d)?,
        None => s.to_fock_auto()?,
    };
    Ok(SigmaAnsatz { tau_sigma, operator: m.operator, tail_mass: m.tail_mass })
}

/// `pi^2 tau^{-2} (1 + p - 2 tau) / 2`, the classicality threshold for the
/// unnormalised mixture `rho_p + beta sigma` in the form usually quoted.
pub fn classicality_threshold(p: f64, tau_sigma: f64) -> f64 {
    PI * PI * (1.0 + p - 2.0 * tau_sigma) / (2.0 * tau_sigma * tau_sigma)
}

/// Smallest `beta` with `R_tau[P_rho] + beta P_sigma >= 0` at
/// `tau = tau_sigma`, found by bisection on the positivity test.
pub fn classicality_threshold_numeric(p: f64, tau_sigma: f64, cfg: &MinSearchConfig) -> Result<f64> {
    let rho_part = regularize(&werner_state(p, 2)?, tau_sigma)?;
    let sigma_part = match &sigma_state(tau_sigma)?.components()[0] {
        PComponent::Smooth(pg) => pg.clone(),
        PComponent::Point { .. } => unreachable!("ansatz is smooth"),
    };
    let nonneg = |beta: f64| -> Result<bool> {
        let d = Density::new(2, vec![rho_part.clone(), sigma_part.scaled(beta)])?;
        Ok(global_min(&d, cfg, Objective::Normalized)?.value >= -cfg.abs_tol)
    };
    if nonneg(0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while !nonneg(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Degenerate("no finite classicality threshold".into()));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if nonneg(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `(3p - 1)(1 + tau)^4 / (6 tau)` for `p > 1/3`, else 0.
pub fn beta_s_closed_form(p: f64, tau_sigma: f64) -> f64 {
    if p <= 1.0 / 3.0 {
        return 0.0;
    }
    (3.0 * p - 1.0) * (1.0 + tau_sigma).powi(4) / (6.0 * tau_sigma)
}

/// Separability-boundary admixture.
#[derive(Debug, Clone)]
pub struct MixResult {
    pub kappa: f64,
    /// `(rho + kappa sigma)/(1 + kappa)`.
    pub rho_s: FockOperator,
    pub min_pt_eigenvalue: f64,
}

/// Bisection settings for [`min_mix_separable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig {
    /// Absolute bisection tolerance on `kappa`.
    pub tol: f64,
    /// The mixture passes when its smallest partial-transpose eigenvalue is `>= -ppt_tol`.
    pub ppt_tol: f64,
    pub kappa_max: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self { tol: 1e-10, ppt_tol: 1e-12, kappa_max: 1e4 }
    }
}

/// Smallest `kappa` for which `rho + kappa sigma` has a positive partial transpose.
pub fn min_mix_separable(rho: &FockOperator, sigma: &FockOperator, cfg: &MixConfig) -> Result<MixResult> {
    require_two_mode(rho)?;
    require_two_mode(sigma)?;
    let dims: Vec<usize> = rho.dims().iter().zip(sigma.dims()).map(|(a, b)| *a.max(b)).collect();
    let rho = rho.embed(&dims)?;
    let sigma = sigma.embed(&dims)?;
    let pt_rho = rho.partial_transpose(1)?.into_matrix();
    let pt_sigma = sigma.partial_transpose(1)?.into_matrix();
    // the coupling pattern of PT(rho) + kappa PT(sigma) is fixed, so the
    // blocks and their submatrices are extracted once
    let blocks: Vec<(DMatrix<C64>, DMatrix<C64>)> = coupled_blocks(&[&pt_rho, &pt_sigma])
        .into_iter()
        .map(|idx| {
            let sub = |m: &DMatrix<C64>| DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
            (sub(&pt_rho), sub(&pt_sigma))
        })
        .collect();
    let min_eig = |kappa: f64| -> f64 {
        let k = C64::new(kappa, 0.0);
        let min = blocks
            .iter()
            .map(|(a, b)| {
                if a.nrows() == 1 {
                    return (a[(0, 0)] + k * b[(0, 0)]).re;
                }
                nalgebra::SymmetricEigen::new(a + b * k).eigenvalues.min()
            })
            .fold(f64::INFINITY, f64::min);
        min / (1.0 + kappa)
    };
    let finish = |kappa: f64, e: f64| -> Result<MixResult> {
        let rho_s = rho.scale_add(1.0 / (1.0 + kappa), &sigma, kappa / (1.0 + kappa))?;
        Ok(MixResult { kappa, rho_s, min_pt_eigenvalue: e })
    };
    let e0 = min_eig(0.0);
    if e0 >= -cfg.ppt_tol {
        return finish(0.0, e0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut e_hi = min_eig(hi);
    while e_hi < -cfg.ppt_tol {
        lo = hi;
        hi *= 2.0;
        if hi > cfg.kappa_max {
            return Err(Error::NotSeparable(cfg.kappa_max));
        }
        e_hi = min_eig(hi);
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let e = min_eig(mid);
        if e >= -cfg.ppt_tol {
            hi = mid;
            e_hi = e;
        } else {
            lo = mid;
        }
    }
    finish(hi, e_hi)
}

/// Settings for the entanglement-depth pipeline.
#[derive(Debug, Clone)]
pub struct NcdeConfig {
    pub search: MinSearchConfig,
    pub mix: MixConfig,
    pub tau_sigma_grid: Vec<f64>,
    /// Relative disagreement between the closed-form and bisected `kappa` that raises a flag.
    pub discrepancy_rel: f64,
}

/// `start, start + step, .., stop` with the end point included when it lies on the grid.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidParameter(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

impl Default for NcdeConfig {
    fn default() -> Self {
        Self {
            search: MinSearchConfig::default(),
            mix: MixConfig::default(),
            tau_sigma_grid: grid(0.5, 1.0, 0.05).expect("static grid"),
            discrepancy_rel: 0.05,
        }
    }
}

/// One ansatz parameter's contribution to the minimisation.
#[derive(Debug, Clone, Serialize)]
pub struct NcdeRecord {
    pub tau_sigma: f64,
    pub kappa: f64,
    pub beta_s_closed_form: f64,
    pub tau_m_rho_s: f64,
    pub n_e: f64,
    pub min_pt_eigenvalue: f64,
    pub discrepancy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NcdeMethod {
    /// The input already passes the PPT test.
    SeparableInput,
    /// `kappa` from PPT bisection.
    PptBisection,
}

impl NcdeMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            NcdeMethod::SeparableInput => "separable-input",
            NcdeMethod::PptBisection => "ppt-bisection",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NcdeResult {
    pub p: Option<f64>,
    pub tau_m_rho: f64,
    pub tau_sigma_star: f64,
    pub kappa: f64,
    pub beta_s_closed_form: f64,
    pub tau_m_rho_s: f64,
    pub n_e: f64,
    pub method: NcdeMethod,
    /// Any grid point where the closed form and the bisection disagree.
    pub discrepancy_flag: bool,
    pub records: Vec<NcdeRecord>,
}

/// Entanglement depth of a two-mode state against the ansatz family.
///
/// The closed-form `kappa` applies to the Werner family only; pass `p` to
/// compare against it.
pub fn ncde(rho: &FockOperator, p: Option<f64>, cfg: &NcdeConfig) -> Result<NcdeResult> {
    require_two_mode(rho)?;
    rho.require_hermitian()?;
    rho.require_unit_trace()?;
    if cfg.tau_sigma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty ansatz grid".into()));
    }
    let state = BosonicState::from_fock(rho.clone());
    let tau_m_rho = depth(&state, &cfg.search)?.tau_m;
    let separable = min_pt_eigenvalue(rho)? >= -cfg.mix.ppt_tol;
    let mut records = Vec::with_capacity(cfg.tau_sigma_grid.len());
    for &ts in &cfg.tau_sigma_grid {
        let closed = p.map_or(f64::NAN, |p| beta_s_closed_form(p, ts));
        if separable {
            records.push(NcdeRecord {
                tau_sigma: ts,
                kappa: 0.0,
                beta_s_closed_form: closed,
                tau_m_rho_s: tau_m_rho,
                n_e: 0.0,
                min_pt_eigenvalue: min_pt_eigenvalue(rho)?,
                discrepancy: p.is_some() && closed != 0.0,
            });
            continue;
        }
        let sigma = sigma_ansatz(ts, None)?;
        let mix = min_mix_separable(rho, &sigma.operator, &cfg.mix)?;
        let k = mix.kappa;
        let rho_s = state.mix(1.0 / (1.0 + k), &sigma_state(ts)?, k / (1.0 + k))?;
        let tau_m_rho_s = depth(&rho_s, &cfg.search)?.tau_m;
        let discrepancy = p.is_some_and(|_| (k - closed).abs() > cfg.discrepancy_rel * closed.abs());
        records.push(NcdeRecord {
            tau_sigma: ts,
            kappa: k,
            beta_s_closed_form: closed,
            tau_m_rho_s,
            n_e: tau_m_rho - tau_m_rho_s,
            min_pt_eigenvalue: mix.min_pt_eigenvalue,
            discrepancy,
        });
    }
    let best = records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.n_e.total_cmp(&b.1.n_e).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let r = &records[best];
    Ok(NcdeResult {
        p,
        tau_m_rho,
        tau_sigma_star: r.tau_sigma,
        kappa: r.kappa,
        beta_s_closed_form: r.beta_s_closed_form,
        tau_m_rho_s: r.tau_m_rho_s,
        n_e: r.n_e,
        method: if separable { NcdeMethod::SeparableInput } else { NcdeMethod::PptBisection },
        discrepancy_flag: records.iter().any(|r| r.discrepancy),
        records,
    })
}

/// One row of the Werner sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub result: NcdeResult,
    pub negativity: f64,
}

impl SweepRow {
    pub fn n_e_normalized(&self) -> f64 {
        if self.result.tau_m_rho > 0.0 {
            self.result.n_e / self.result.tau_m_rho
        } else {
            0.0
        }
    }
}

/// Entanglement depth over a grid of Werner weights; rows come back in grid order.
pub fn ncde_sweep(ps: &[f64], cfg: &NcdeConfig) -> Result<Vec<SweepRow>> {
    ps.par_iter()
        .map(|&p| {
            let rho = werner_state(p, 2)?;
            Ok(SweepRow { result: ncde(&rho, Some(p), cfg)?, negativity: negativity(&rho)? })
        })
        .collect()
}

/// Fixed-point decimal with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = if x == 0.0 { 8 } else { (8 - x.abs().log10().floor() as i64).max(0) as usize };
    let s = format!("{x:.digits$}");
    // avoid "-0.000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub const CSV_HEADER: &str =
    "p,tau_m_rho,tau_sigma_star,kappa,tau_m_rho_s,n_e,n_e_normalized,negativity,method,discrepancy_flag";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let r = &row.result;
        let cells = [
            r.p.unwrap_or(f64::NAN),
            r.tau_m_rho,
            r.tau_sigma_star,
            r.kappa,
            r.tau_m_rho_s,
            r.n_e,
            row.n_e_normalized(),
            row.negativity,
        ];
        let nums: Vec<String> = cells.iter().map(|v| format_sig9(*v)).collect();
        writeln!(out, "{},{},{}", nums.join(","), r.method.as_str(), r.discrepancy_flag)?;
    }
    Ok(())
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("need two equal-length series of length >= 2".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn werner_block_entries() {
        let w = werner_state(0.0, 8).unwrap();
        assert!((w.trace().re - 1.0).abs() < 1e-15);
        assert!((w.entry(&[0, 1], &[0, 1]).re - 0.25).abs() < 1e-15);
        let w1 = werner_state(1.0, 3).unwrap();
        assert!((w1.entry(&[0, 0], &[1, 1]).re - 0.5).abs() < 1e-15);
        assert!(werner_state(1.2, 8).is_err());
    }

    #[test]
    fn negativity_of_werner() {
        for &p in &[0.0, 1.0 / 3.0, 0.5, 1.0] {
            let n = negativity(&werner_state(p, 4).unwrap()).unwrap();
            assert!((n - ((3.0 * p - 1.0) / 2.0).max(0.0)).abs() < 1e-12, "p={p}: {n}");
        }
    }

    #[test]
    fn ansatz_marginal_against_radial_integral() {
        // <n|marginal|n> = ∫ P(r) e^{-r^2} r^{2n} / n! 2 pi r dr, composite Simpson
        let tau: f64 = 0.5;
        let s = sigma_ansatz(tau, Some(&[40, 40])).unwrap();
        let op = &s.operator;
        for n in 0..4usize {
            let marginal: f64 = (0..40).map(|b| op.entry(&[n, b], &[n, b]).re).sum();
            let steps = 20_000;
            let h = 12.0 / steps as f64;
            let f = |r: f64| {
                let p = (-r * r / tau).exp() / (PI * tau) * (0.5 + r * r / (2.0 * tau));
                p * (-r * r).exp() * r.powi(2 * n as i32) / crate::util::factorial(n) * 2.0 * PI * r
            };
            let mut acc = f(0.0) + f(12.0);
            for i in 1..steps {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            acc *= h / 3.0;
            assert!((marginal - acc).abs() < 1e-10, "n={n}: {marginal} vs {acc}");
        }
        assert!((op.trace().re - 1.0).abs() <= s.tail_mass + 1e-12);
    }

    #[test]
    fn threshold_formula_examples() {
        assert_eq!(classicality_threshold(1.0, 1.0), 0.0);
        assert!(classicality_threshold(1.0 / 3.0, 2.0 / 3.0).abs() < 1e-12);
        assert!((classicality_threshold(0.6, 0.7) - PI * PI * 0.2 / (2.0 * 0.49)).abs() < 1e-12);
    }

    #[test]
    fn beta_s_examples() {
        assert_eq!(beta_s_closed_form(1.0 / 3.0, 0.7), 0.0);
        assert!((beta_s_closed_form(1.0, 1.0) - 16.0 / 3.0).abs() < 1e-12);
        assert!((beta_s_closed_form(0.6, 0.7) - 0.8 * 1.7f64.powi(4) / 4.2).abs() < 1e-12);
    }

    #[test]
    fn separable_input_needs_no_admixture() {
        let rho = werner_state(0.2, 2).unwrap();
        let sigma = sigma_ansatz(0.7, None).unwrap();
        let m = min_mix_separable(&rho, &sigma.operator, &MixConfig::default()).unwrap();
        assert_eq!(m.kappa, 0.0);
    }

    #[test]
    fn kappa_matches_closed_form() {
        let rho = werner_state(0.6, 2).unwrap();
        let sigma = sigma_ansatz(0.7, None).unwrap();
        let m = min_mix_separable(&rho, &sigma.operator, &MixConfig::default()).unwrap();
        assert!((m.kappa - beta_s_closed_form(0.6, 0.7)).abs() < 1e-6 * m.kappa, "{}", m.kappa);
        assert!(m.min_pt_eigenvalue.abs() <= 1e-9);
    }

    #[test]
    fn grids_and_formatting() {
        assert_eq!(grid(0.5, 1.0, 0.05).unwrap().len(), 11);
        assert_eq!(grid(0.0, 1.0, 0.05).unwrap()[20], 1.0);
        assert_eq!(format_sig9(0.7), "0.700000000");
        assert_eq!(format_sig9(16.0 / 3.0), "5.33333333");
        assert_eq!(format_sig9(-1e-20), "-0.0000000000000000000100000000");
        assert_eq!(format_sig9(0.0), "0.00000000");
        assert!(
            (pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap() - 4.5 / (2.0f64 * 61.0 / 6.0).sqrt()).abs() < 1e-14
        );
    }
}
