//! Closed-form quasi-probability machinery.
//!
//! A Fock-truncated operator has a normally ordered characteristic function
//! that is a polynomial in `(beta, beta*)`. Its Gaussian-regularised P
//! distribution is therefore a Gaussian envelope times a polynomial, which
//! [`PolyGaussian`] stores exactly:
//!
//! ```text
//! R_tau[P](z) = (pi tau)^{-m} exp(-sum |z_i - c_i|^2 / tau) * sum_K c_K prod (z_i - c_i)^{k_i} conj(z_i - c_i)^{l_i}
//! ```
//!
//! All coefficient arithmetic uses Gaussian-moment identities; no grids are
//! involved. The normalisation integrates to `Tr(rho)` against `d^2 z`, so at
//! `tau = 1` the distribution equals `<z|rho|z> / pi`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fock::{coherent_expectation, CoherentPoint, FockOperator, C64};
use crate::util::{binomial, factorial, falling, ln_factorial};

/// Per-mode exponent pairs flattened as `[k1, l1, k2, l2, ..]`.
pub type Exponent = Vec<u16>;

/// Coefficients below this magnitude are dropped when building polynomials.
const COEFF_EPS: f64 = 0.0;

fn add_term(map: &mut BTreeMap<Exponent, C64>, key: Exponent, value: C64) {
    if value.norm() <= COEFF_EPS {
        return;
    }
    *map.entry(key).or_insert(C64::new(0.0, 0.0)) += value;
}

/// Expands a product over modes of per-mode term lists into `map`.
fn expand_product(per_mode: &[Vec<(u16, u16, f64)>], scale: C64, map: &mut BTreeMap<Exponent, C64>) {
    let m = per_mode.len();
    let mut idx = vec![0usize; m];
    if per_mode.iter().any(|v| v.is_empty()) {
        return;
    }
    loop {
        let mut key = Vec::with_capacity(2 * m);
        let mut factor = 1.0;
        for (mode, &i) in idx.iter().enumerate() {
            let (k, l, f) = per_mode[mode][i];
            key.push(k);
            key.push(l);
            factor *= f;
        }
        add_term(map, key, scale * factor);
        let mut mode = m;
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

/// Polynomial `sum c prod beta_i^{p_i} conj(beta_i)^{q_i}` of a normally
/// ordered characteristic function `chi(beta) = Tr[rho e^{beta a†} e^{-beta* a}]`.
#[derive(Debug, Clone)]
pub struct CharPoly {
    modes: usize,
    coeffs: BTreeMap<Exponent, C64>,
}

impl CharPoly {
    pub fn from_operator(rho: &FockOperator) -> Self {
        let modes = rho.modes();
        let mut coeffs = BTreeMap::new();
        for (r, c, v) in rho.nonzeros() {
            // Tr[rho D] = sum_{n,m} rho_{nm} <m|D|n>
            let n_idx = rho.multi_index(r);
            let m_idx = rho.multi_index(c);
            let per_mode: Vec<Vec<(u16, u16, f64)>> = n_idx
                .iter()
                .zip(&m_idx)
                .map(|(&n, &m)| {
                    let half = 0.5 * (ln_factorial(m) + ln_factorial(n));
                    (0..=n.min(m))
                        .map(|j| {
                            let (p, q) = (m - j, n - j);
                            let mag = (half - ln_factorial(p) - ln_factorial(q) - ln_factorial(j)).exp();
                            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                            (p as u16, q as u16, sign * mag)
                        })
                        .collect()
                })
                .collect();
            expand_product(&per_mode, v, &mut coeffs);
        }
        Self { modes, coeffs }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &BTreeMap<Exponent, C64> {
        &self.coeffs
    }

    pub fn eval(&self, beta: &CoherentPoint) -> Result<C64> {
        beta.check_modes(self.modes)?;
        Ok(self
            .coeffs
            .iter()
            .map(|(e, c)| {
                let mut t = *c;
                for (i, b) in beta.0.iter().enumerate() {
                    t *= b.powu(e[2 * i] as u32) * b.conj().powu(e[2 * i + 1] as u32);
                }
                t
            })
            .sum())
    }

    /// Gaussian-weighted inverse Fourier transform of the polynomial:
    /// `pi^{-2m} ∫ d^2beta e^{-tau|beta|^2} chi(beta) e^{z beta* - z* beta}`.
    pub fn regularize(&self, tau: f64) -> Result<PolyGaussian> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("regularisation tau must be > 0, got {tau}")));
        }
        let mut out = BTreeMap::new();
        for (e, c) in &self.coeffs {
            let per_mode: Vec<Vec<(u16, u16, f64)>> = (0..self.modes)
                .map(|i| {
                    let (p, q) = (e[2 * i] as usize, e[2 * i + 1] as usize);
                    (0..=p.min(q))
                        .map(|j| {
                            let sign = if (q - j) % 2 == 0 { 1.0 } else { -1.0 };
                            let f = sign * binomial(p, j) * falling(q, j) * tau.powi(-((p + q - j) as i32));
                            ((p - j) as u16, (q - j) as u16, f)
                        })
                        .collect()
                })
                .collect();
            expand_product(&per_mode, *c, &mut out);
        }
        PolyGaussian::new(self.modes, tau, out)
    }
}

/// Characteristic function view of an operator, evaluated on demand.
#[derive(Debug, Clone)]
pub struct CharFunction<'a> {
    op: &'a FockOperator,
    poly: CharPoly,
}

impl<'a> CharFunction<'a> {
    pub fn new(op: &'a FockOperator) -> Self {
        Self { op, poly: CharPoly::from_operator(op) }
    }

    pub fn operator(&self) -> &FockOperator {
        self.op
    }

    pub fn poly(&self) -> &CharPoly {
        &self.poly
    }

    pub fn eval(&self, beta: &CoherentPoint) -> Result<C64> {
        self.poly.eval(beta)
    }

    /// `K_tau(beta) = e^{-tau |beta|^2} chi(beta)`
    pub fn regularized(&self, tau: f64, beta: &CoherentPoint) -> Result<C64> {
        Ok(self.eval(beta)? * (-tau * beta.norm_sqr()).exp())
    }
}

/// Normally ordered characteristic function `Tr[rho e^{beta a†} e^{-beta* a}]`.
pub fn char_normal(rho: &FockOperator, beta: &CoherentPoint) -> Result<C64> {
    CharPoly::from_operator(rho).eval(beta)
}

/// `R_tau[P]` of a Fock-truncated operator.
pub fn regularize(rho: &FockOperator, tau: f64) -> Result<PolyGaussian> {
    CharPoly::from_operator(rho).regularize(tau)
}

/// Husimi distribution `<z|rho|z> / pi`.
pub fn q_function(rho: &FockOperator, z: &CoherentPoint) -> Result<f64> {
    Ok(coherent_expectation(rho, z)? / PI)
}

/// Gaussian envelope times a polynomial, the exact form of a regularised
/// P distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGaussian {
    modes: usize,
    tau: f64,
    center: Vec<C64>,
    coeffs: BTreeMap<Exponent, C64>,
    terms: Vec<(Exponent, C64)>,
    max_exp: Vec<usize>,
}

impl PolyGaussian {
    pub fn new(modes: usize, tau: f64, coeffs: BTreeMap<Exponent, C64>) -> Result<Self> {
        Self::with_center(modes, tau, vec![C64::new(0.0, 0.0); modes], coeffs)
    }

    pub fn with_center(modes: usize, tau: f64, center: Vec<C64>, coeffs: BTreeMap<Exponent, C64>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("envelope tau must be > 0, got {tau}")));
        }
        if center.len() != modes {
            return Err(Error::ModeMismatch { expected: modes, got: center.len() });
        }
        if let Some(bad) = coeffs.keys().find(|k| k.len() != 2 * modes) {
            return Err(Error::DimensionMismatch(format!("exponent {bad:?} for {modes} modes")));
        }
        let terms: Vec<(Exponent, C64)> = coeffs.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut max_exp = vec![0usize; modes];
        for (k, _) in &terms {
            for i in 0..modes {
                max_exp[i] = max_exp[i].max(k[2 * i] as usize).max(k[2 * i + 1] as usize);
            }
        }
        Ok(Self { modes, tau, center, coeffs, terms, max_exp })
    }

    /// `weight * (pi tau)^{-m} exp(-|z - center|^2 / tau)`.
    pub fn gaussian(center: &CoherentPoint, tau: f64, weight: f64) -> Result<Self> {
        let modes = center.modes();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![0u16; 2 * modes], C64::new(weight, 0.0));
        Self::with_center(modes, tau, center.0.clone(), coeffs)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn center(&self) -> &[C64] {
        &self.center
    }

    pub fn is_centered(&self) -> bool {
        self.center.iter().all(|c| c.norm() == 0.0)
    }

    pub fn coeffs(&self) -> &BTreeMap<Exponent, C64> {
        &self.coeffs
    }

    pub fn coeff(&self, exponent: &[u16]) -> C64 {
        self.coeffs.get(exponent).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total degree of any monomial.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(k, _)| k.iter().map(|&e| e as usize).sum::<usize>()).max().unwrap_or(0)
    }

    /// Polynomial factor at `z` (complex; real for Hermitian-symmetric input).
    pub fn poly_value(&self, z: &[C64]) -> C64 {
        let shifted: Vec<C64> = z.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let powers: Vec<(Vec<C64>, Vec<C64>)> = shifted
            .iter()
            .zip(&self.max_exp)
            .map(|(w, &n)| {
                let mut p = Vec::with_capacity(n + 1);
                let mut q = Vec::with_capacity(n + 1);
                let (mut a, mut b) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
                for _ in 0..=n {
                    p.push(a);
                    q.push(b);
                    a *= w;
                    b *= w.conj();
                }
                (p, q)
            })
            .collect();
        let mut sum = C64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            let mut t = *c;
            for (i, (p, q)) in powers.iter().enumerate() {
                t *= p[k[2 * i] as usize] * q[k[2 * i + 1] as usize];
            }
            sum += t;
        }
        sum
    }

    /// `-sum |z_i - c_i|^2 / tau - m ln(pi tau)`, the log of the envelope.
    pub fn log_envelope(&self, z: &[C64]) -> f64 {
        let r2: f64 = z.iter().zip(&self.center).map(|(a, b)| (a - b).norm_sqr()).sum();
        -r2 / self.tau - self.modes as f64 * (PI * self.tau).ln()
    }

    pub fn eval_complex(&self, z: &CoherentPoint) -> Result<C64> {
        z.check_modes(self.modes)?;
        Ok(self.poly_value(&z.0) * self.log_envelope(&z.0).exp())
    }

    /// Pointwise value; the imaginary residue of Hermitian-symmetric
    /// coefficients is discarded.
    pub fn eval(&self, z: &CoherentPoint) -> Result<f64> {
        let v = self.eval_complex(z)?;
        debug_assert!(v.im.abs() <= 1e-10 * v.re.abs().max(1.0), "imaginary residue {}", v.im);
        Ok(v.re)
    }

    /// Phase-space integral, from the closed-form radial moments
    /// `∫ e^{-|w|^2/tau} |w|^{2k} d^2w / (pi tau) = k! tau^k`.
    pub fn integral(&self) -> C64 {
        self.terms
            .iter()
            .filter(|(k, _)| (0..self.modes).all(|i| k[2 * i] == k[2 * i + 1]))
            .map(|(k, c)| {
                let mut f = 1.0;
                for i in 0..self.modes {
                    let n = k[2 * i] as usize;
                    f *= factorial(n) * self.tau.powi(n as i32);
                }
                c * f
            })
            .sum()
    }

    /// Largest `|c_{(k,l)} - conj(c_{(l,k)})|` over all monomials.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, c) in &self.terms {
            let swapped: Exponent = k.chunks(2).flat_map(|p| [p[1], p[0]]).collect();
            worst = worst.max((c - self.coeff(&swapped).conj()).norm());
        }
        worst
    }

    /// True when the polynomial is a non-negative combination of `|w_i|^{2k}`
    /// monomials, which makes the distribution non-negative everywhere.
    pub fn is_manifestly_nonnegative(&self) -> bool {
        self.terms.iter().all(|(k, c)| {
            (0..self.modes).all(|i| k[2 * i] == k[2 * i + 1]) && c.re >= 0.0 && c.im.abs() <= 1e-14 * c.re.max(1.0)
        })
    }

    pub fn scaled(&self, weight: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|(k, c)| (k.clone(), c * weight)).collect();
        Self::with_center(self.modes, self.tau, self.center.clone(), coeffs).expect("valid by construction")
    }

    /// Further Gaussian smoothing: `R_extra[self]`, using
    /// `R_{a+b} = R_a ∘ R_b`. The convolution of a `tau`-envelope monomial with
    /// a Gaussian of variance `extra` is a Gaussian of variance
    /// `T = tau + extra` times the moments of a complex Gaussian with mean
    /// `tau z / T` and variance `tau extra / T`.
    pub fn convolve_further(&self, extra: f64) -> Result<Self> {
        if !(extra > 0.0) || !extra.is_finite() {
            return Err(Error::InvalidParameter(format!("extra smoothing must be > 0, got {extra}")));
        }
        let total = self.tau + extra;
        let shrink = self.tau / total;
        let var = self.tau * extra / total;
        let mut out = BTreeMap::new();
        for (k, c) in &self.terms {
            let per_mode: Vec<Vec<(u16, u16, f64)>> = (0..self.modes)
                .map(|i| {
                    let (kk, ll) = (k[2 * i] as usize, k[2 * i + 1] as usize);
                    (0..=kk.min(ll))
                        .map(|j| {
                            let f = binomial(kk, j)
                                * binomial(ll, j)
                                * factorial(j)
                                * var.powi(j as i32)
                                * shrink.powi((kk + ll - 2 * j) as i32);
                            ((kk - j) as u16, (ll - j) as u16, f)
                        })
                        .collect()
                })
                .collect();
            expand_product(&per_mode, *c, &mut out);
        }
        Self::with_center(self.modes, total, self.center.clone(), out)
    }

    /// Phase-space dilation `f(z) -> a^{-2m} f(z / a)`, the action of the
    /// scaling map on distributions.
    pub fn dilate(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("scaling parameter must be > 0, got {a}")));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, c)| {
                let deg: i32 = k.iter().map(|&e| e as i32).sum();
                (k.clone(), c * a.powi(-deg))
            })
            .collect();
        Self::with_center(self.modes, self.tau * a * a, self.center.iter().map(|c| c * a).collect(), coeffs)
    }

    /// Debug dump: a header line then one `k1 l1 .. km lm re im` line per
    /// monomial in lexicographic exponent order.
    pub fn dump(&self) -> String {
        let mut s = format!("tau={} modes={}\n", self.tau, self.modes);
        for (k, c) in &self.coeffs {
            for e in k {
                let _ = write!(s, "{e} ");
            }
            let _ = writeln!(s, "{:e} {:e}", c.re, c.im);
        }
        s
    }
}

/// A finite sum of [`PolyGaussian`] terms with possibly different envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    modes: usize,
    parts: Vec<PolyGaussian>,
}

impl Density {
    pub fn new(modes: usize, parts: Vec<PolyGaussian>) -> Result<Self> {
        if let Some(p) = parts.iter().find(|p| p.modes() != modes) {
            return Err(Error::ModeMismatch { expected: modes, got: p.modes() });
        }
        Ok(Self { modes, parts })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn parts(&self) -> &[PolyGaussian] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }

    pub fn eval(&self, z: &CoherentPoint) -> Result<f64> {
        z.check_modes(self.modes)?;
        Ok(self.parts.iter().map(|p| (p.poly_value(&z.0) * p.log_envelope(&z.0).exp()).re).sum())
    }

    pub fn integral(&self) -> f64 {
        self.parts.iter().map(|p| p.integral().re).sum()
    }

    pub fn is_manifestly_nonnegative(&self) -> bool {
        self.parts.iter().all(|p| p.is_manifestly_nonnegative())
    }

    pub fn convolve_further(&self, extra: f64) -> Result<Self> {
        let parts = self.parts.iter().map(|p| p.convolve_further(extra)).collect::<Result<_>>()?;
        Self::new(self.modes, parts)
    }

    pub fn dilate(&self, a: f64) -> Result<Self> {
        let parts = self.parts.iter().map(|p| p.dilate(a)).collect::<Result<_>>()?;
        Self::new(self.modes, parts)
    }

    pub fn dump(&self) -> String {
        self.parts.iter().map(PolyGaussian::dump).collect()
    }
}

impl From<PolyGaussian> for Density {
    fn from(p: PolyGaussian) -> Self {
        Self { modes: p.modes(), parts: vec![p] }
    }
}

/// Anything with an exact Gaussian-regularised P distribution.
pub trait Regularize {
    fn modes(&self) -> usize;
    fn regularize(&self, tau: f64) -> Result<Density>;
}

impl Regularize for FockOperator {
    fn modes(&self) -> usize {
        FockOperator::modes(self)
    }

    fn regularize(&self, tau: f64) -> Result<Density> {
        Ok(regularize(self, tau)?.into())
    }
}

impl Regularize for CharPoly {
    fn modes(&self) -> usize {
        self.modes
    }

    fn regularize(&self, tau: f64) -> Result<Density> {
        Ok(CharPoly::regularize(self, tau)?.into())
    }
}


#[cfg(test)]
mod husimi_bridge {
    use super::*;
    use crate::fock::coherent_ket;

    #[test]
    fn tau_one_matches_husimi_without_phase_symmetry() {
        let a = coherent_ket(&CoherentPoint::single(C64::new(0.7, 0.2)), &[30]).unwrap();
        let b = coherent_ket(&CoherentPoint::single(C64::new(-0.1, 0.5)), &[30]).unwrap();
        let op = FockOperator::projector(vec![30], &(a + b)).unwrap();
        let pg = regularize(&op, 1.0).unwrap();
        for z in [C64::new(0.7, 0.2), C64::new(-0.3, 0.4), C64::new(0.1, -0.9)] {
            let p = CoherentPoint::single(z);
            assert!((pg.eval(&p).unwrap() - q_function(&op, &p).unwrap()).abs() < 1e-12);
        }
    }
}
