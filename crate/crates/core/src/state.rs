//! Bosonic states as a Fock-truncated part plus analytic P-function components.
//!
//! Finite-support states (Fock states, their mixtures, the Werner family) are
//! exact as [`FockOperator`]s. States with infinite Fock support (coherent,
//! thermal, the Diósi state, the classical ansatz) are carried by their P
//! function instead: point masses and centred Gaussian-times-polynomial
//! terms. Regularisation, the scaling map and Husimi values are exact on both
//! parts; Fock matrices are materialised on demand with a reported tail mass.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{coherent_expectation, coherent_ket, CoherentPoint, FockOperator, C64};
use crate::quasiprob::{CharPoly, Density, PolyGaussian, Regularize};
use crate::scaling;
use crate::util::ln_factorial;

/// Default refusal threshold for truncation tail mass.
pub const TAIL_LIMIT: f64 = 1e-8;
/// Default single-mode cutoff.
pub const DEFAULT_DIM_SINGLE: usize = 24;
/// Default per-mode cutoff for two-mode states.
pub const DEFAULT_DIM_TWO: usize = 12;
const MAX_AUTO_DIM_SINGLE: usize = 400;
const MAX_AUTO_DIM_MULTI: usize = 64;

/// One analytic term of a P function.
#[derive(Debug, Clone, PartialEq)]
pub enum PComponent {
    /// `weight * delta(z - at)`, a (weighted) coherent projector.
    Point { weight: f64, at: CoherentPoint },
    /// A P function that is itself Gaussian times polynomial.
    Smooth(PolyGaussian),
}

impl PComponent {
    pub fn modes(&self) -> usize {
        match self {
            PComponent::Point { at, .. } => at.modes(),
            PComponent::Smooth(pg) => pg.modes(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            PComponent::Point { weight, .. } => *weight,
            PComponent::Smooth(pg) => pg.integral().re,
        }
    }

    pub fn regularize(&self, tau: f64) -> Result<PolyGaussian> {
        match self {
            PComponent::Point { weight, at } => PolyGaussian::gaussian(at, tau, *weight),
            PComponent::Smooth(pg) => pg.convolve_further(tau),
        }
    }

    pub fn dilate(&self, a: f64) -> Result<Self> {
        Ok(match self {
            PComponent::Point { weight, at } => PComponent::Point { weight: *weight, at: at.scaled(a) },
            PComponent::Smooth(pg) => PComponent::Smooth(pg.dilate(a)?),
        })
    }

    pub fn scaled(&self, w: f64) -> Self {
        match self {
            PComponent::Point { weight, at } => PComponent::Point { weight: weight * w, at: at.clone() },
            PComponent::Smooth(pg) => PComponent::Smooth(pg.scaled(w)),
        }
    }

    /// Fock matrix on the truncated space of `dims`.
    pub fn materialize(&self, dims: &[usize]) -> Result<DMatrix<C64>> {
        match self {
            PComponent::Point { weight, at } => {
                let ket = coherent_ket(at, dims)?;
                Ok(&ket * ket.adjoint() * C64::new(*weight, 0.0))
            }
            PComponent::Smooth(pg) => materialize_smooth(pg, dims),
        }
    }
}

/// `<m|rho|n> = ∫ P(z) e^{-|z|^2} z^m conj(z)^n / sqrt(m! n!) d^2z` for a
/// centred Gaussian-times-polynomial P.
fn materialize_smooth(pg: &PolyGaussian, dims: &[usize]) -> Result<DMatrix<C64>> {
    if !pg.is_centered() {
        return Err(Error::Unsupported("Fock materialisation of displaced smooth components".into()));
    }
    if dims.len() != pg.modes() {
        return Err(Error::ModeMismatch { expected: pg.modes(), got: dims.len() });
    }
    let v = pg.tau();
    let ratio_ln = (v / (1.0 + v)).ln();
    let size: usize = dims.iter().product();
    let mut out = DMatrix::zeros(size, size);
    for (k, c) in pg.coeffs() {
        // per mode: list of (m, n, value) with k + m = l + n
        let per_mode: Vec<Vec<(usize, usize, f64)>> = dims
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let (kk, ll) = (k[2 * i] as i64, k[2 * i + 1] as i64);
                (0..d)
                    .filter_map(|m| {
                        let n = m as i64 + kk - ll;
                        if n < 0 || n >= d as i64 {
                            return None;
                        }
                        let n = n as usize;
                        let big_n = m + kk as usize;
                        let ln = ln_factorial(big_n) + (big_n as f64 + 1.0) * ratio_ln
                            - v.ln()
                            - 0.5 * (ln_factorial(m) + ln_factorial(n));
                        Some((m, n, ln.exp()))
                    })
                    .collect()
            })
            .collect();
        if per_mode.iter().any(|l| l.is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; dims.len()];
        'outer: loop {
            let (mut row, mut col, mut val) = (0usize, 0usize, 1.0);
            for (i, &j) in idx.iter().enumerate() {
                let (m, n, f) = per_mode[i][j];
                row = row * dims[i] + m;
                col = col * dims[i] + n;
                val *= f;
            }
            out[(row, col)] += c * val;
            let mut mode = dims.len();
            loop {
                if mode == 0 {
                    break 'outer;
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
    Ok(out)
}

/// A Fock matrix materialised from a state, with the trace mass lost to the cutoff.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub operator: FockOperator,
    pub tail_mass: f64,
}

/// A bosonic state: optional Fock-truncated part plus analytic P components.
#[derive(Debug, Clone)]
pub struct BosonicState {
    modes: usize,
    fock: Option<FockOperator>,
    fock_char: Option<CharPoly>,
    components: Vec<PComponent>,
}

impl BosonicState {
    pub fn from_fock(op: FockOperator) -> Self {
        let fock_char = Some(CharPoly::from_operator(&op));
        Self { modes: op.modes(), fock: Some(op), fock_char, components: Vec::new() }
    }

    pub fn analytic(modes: usize, components: Vec<PComponent>) -> Result<Self> {
        Self::new(modes, None, components)
    }

    pub fn new(modes: usize, fock: Option<FockOperator>, components: Vec<PComponent>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("at least one mode is required".into()));
        }
        if let Some(op) = &fock {
            if op.modes() != modes {
                return Err(Error::ModeMismatch { expected: modes, got: op.modes() });
            }
        }
        if let Some(c) = components.iter().find(|c| c.modes() != modes) {
            return Err(Error::ModeMismatch { expected: modes, got: c.modes() });
        }
        let fock_char = fock.as_ref().map(CharPoly::from_operator);
        Ok(Self { modes, fock, fock_char, components })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn fock_part(&self) -> Option<&FockOperator> {
        self.fock.as_ref()
    }

    pub fn components(&self) -> &[PComponent] {
        &self.components
    }

    pub fn is_pure_fock(&self) -> bool {
        self.components.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.fock.as_ref().map_or(0.0, |f| f.trace().re) + self.components.iter().map(PComponent::trace).sum::<f64>()
    }

    /// `w_self * self + w_other * other`.
    pub fn mix(&self, w_self: f64, other: &BosonicState, w_other: f64) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::ModeMismatch { expected: self.modes, got: other.modes });
        }
        let fock = match (&self.fock, &other.fock) {
            (None, None) => None,
            (Some(a), None) => Some(a.scale(w_self)),
            (None, Some(b)) => Some(b.scale(w_other)),
            (Some(a), Some(b)) => {
                let dims: Vec<usize> = a.dims().iter().zip(b.dims()).map(|(x, y)| *x.max(y)).collect();
                Some(a.embed(&dims)?.scale_add(w_self, &b.embed(&dims)?, w_other)?)
            }
        };
        let components = self
            .components
            .iter()
            .map(|c| c.scaled(w_self))
            .chain(other.components.iter().map(|c| c.scaled(w_other)))
            .collect();
        Self::new(self.modes, fock, components)
    }

    /// Tensor product of two states. Analytic parts combine when both sides
    /// are points or share the same envelope width.
    pub fn tensor(&self, other: &BosonicState) -> Result<Self> {
        let modes = self.modes + other.modes;
        match (self.is_pure_fock(), other.is_pure_fock(), &self.fock, &other.fock) {
            (true, true, Some(a), Some(b)) => Ok(Self::from_fock(a.tensor(b)?)),
            _ if self.fock.is_none() && other.fock.is_none() => {
                let mut comps = Vec::new();
                for x in &self.components {
                    for y in &other.components {
                        comps.push(tensor_components(x, y)?);
                    }
                }
                Self::analytic(modes, comps)
            }
            _ => Err(Error::Unsupported("tensor product of mixed Fock/analytic states".into())),
        }
    }

    /// Scaling map on both parts. Also returns the tail-inflation measure of
    /// the Fock part (zero for states supported away from the cutoff).
    pub fn lambda_map(&self, a: f64) -> Result<(Self, f64)> {
        let (fock, inflation) = match &self.fock {
            Some(op) => (Some(scaling::lambda_map(op, a)?), scaling::tail_inflation(op, a)?),
            None => (None, 0.0),
        };
        let components = self.components.iter().map(|c| c.dilate(a)).collect::<Result<_>>()?;
        Ok((Self::new(self.modes, fock, components)?, inflation))
    }

    /// `<z|rho|z>`: truncated coherent vectors on the Fock part and the exact
    /// Husimi value `pi R_1[P](z)` on analytic components.
    pub fn coherent_expectation(&self, z: &CoherentPoint) -> Result<f64> {
        z.check_modes(self.modes)?;
        let mut total = match &self.fock {
            Some(op) => coherent_expectation(op, z)?,
            None => 0.0,
        };
        for c in &self.components {
            total += PI * c.regularize(1.0)?.eval(z)?;
        }
        Ok(total)
    }

    /// Materialises on the given cutoffs without the tail check.
    pub fn to_fock_unchecked(&self, dims: &[usize]) -> Result<Materialized> {
        if dims.len() != self.modes {
            return Err(Error::ModeMismatch { expected: self.modes, got: dims.len() });
        }
        let size: usize = dims.iter().product();
        let mut m = DMatrix::zeros(size, size);
        if let Some(op) = &self.fock {
            m += op.embed(dims)?.matrix();
        }
        let mut tail = 0.0;
        for c in &self.components {
            let cm = c.materialize(dims)?;
            tail += (c.trace() - cm.trace().re).abs();
            m += cm;
        }
        Ok(Materialized { operator: FockOperator::new(dims.to_vec(), m)?, tail_mass: tail })
    }

    /// Materialises on the given cutoffs, refusing when the lost mass exceeds
    /// [`TAIL_LIMIT`].
    pub fn to_fock(&self, dims: &[usize]) -> Result<Materialized> {
        let mat = self.to_fock_unchecked(dims)?;
        if mat.tail_mass > TAIL_LIMIT {
            return Err(Error::TruncationTail { tail: mat.tail_mass, limit: TAIL_LIMIT });
        }
        Ok(mat)
    }

    /// Smallest uniform cutoff (at least the mode default and the Fock part's
    /// own cutoffs) whose tail mass is within [`TAIL_LIMIT`].
    pub fn auto_dims(&self) -> Result<Vec<usize>> {
        let base = if self.modes == 1 { DEFAULT_DIM_SINGLE } else { DEFAULT_DIM_TWO };
        let floor = self.fock.as_ref().map_or(2, |f| *f.dims().iter().max().unwrap());
        if self.components.is_empty() {
            return Ok(self.fock.as_ref().unwrap().dims().to_vec());
        }
        let cap = if self.modes == 1 { MAX_AUTO_DIM_SINGLE } else { MAX_AUTO_DIM_MULTI };
        let mut d = base.max(floor);
        loop {
            let tail: f64 =
                self.components.iter().map(|c| component_tail(c, &vec![d; self.modes])).sum::<Result<f64>>()?;
            if tail <= TAIL_LIMIT {
                return Ok(vec![d; self.modes]);
            }
            if d >= cap {
                return Err(Error::TruncationTail { tail, limit: TAIL_LIMIT });
            }
            d = (d + d / 4).min(cap);
        }
    }

    pub fn to_fock_auto(&self) -> Result<Materialized> {
        self.to_fock(&self.auto_dims()?)
    }
}

fn component_tail(c: &PComponent, dims: &[usize]) -> Result<f64> {
    // Diagonal only: tail mass needs the trace, not the full matrix.
    let inside: f64 = match c {
        PComponent::Point { weight, at } => {
            at.0.iter().zip(dims).map(|(z, &d)| crate::fock::coherent_vector(*z, d).norm_squared()).product::<f64>()
                * weight
        }
        PComponent::Smooth(pg) => {
            let diag_only = pg.coeffs().iter().filter(|(k, _)| k.chunks(2).all(|p| p[0] == p[1]));
            let v = pg.tau();
            let mut total = 0.0;
            for (k, coeff) in diag_only {
                let mut prod = 1.0;
                for (i, &d) in dims.iter().enumerate() {
                    let kk = k[2 * i] as usize;
                    let s: f64 = (0..d)
                        .map(|m| {
                            let big_n = m + kk;
                            (ln_factorial(big_n) + (big_n as f64 + 1.0) * (v / (1.0 + v)).ln()
                                - v.ln()
                                - ln_factorial(m))
                            .exp()
                        })
                        .sum();
                    prod *= s;
                }
                total += coeff.re * prod;
            }
            total
        }
    };
    Ok((c.trace() - inside).abs())
}

fn tensor_components(x: &PComponent, y: &PComponent) -> Result<PComponent> {
    match (x, y) {
        (PComponent::Point { weight: wa, at: a }, PComponent::Point { weight: wb, at: b }) => {
            let mut at = a.0.clone();
            at.extend_from_slice(&b.0);
            Ok(PComponent::Point { weight: wa * wb, at: CoherentPoint(at) })
        }
        (PComponent::Smooth(a), PComponent::Smooth(b)) if (a.tau() - b.tau()).abs() <= 1e-15 * a.tau() => {
            let mut coeffs = BTreeMap::new();
            for (ka, ca) in a.coeffs() {
                for (kb, cb) in b.coeffs() {
                    let mut k = ka.clone();
                    k.extend_from_slice(kb);
                    *coeffs.entry(k).or_insert(C64::new(0.0, 0.0)) += ca * cb;
                }
            }
            let mut center = a.center().to_vec();
            center.extend_from_slice(b.center());
            Ok(PComponent::Smooth(PolyGaussian::with_center(a.modes() + b.modes(), a.tau(), center, coeffs)?))
        }
        _ => Err(Error::Unsupported("tensor product of components with different envelopes".into())),
    }
}

impl Regularize for BosonicState {
    fn modes(&self) -> usize {
        self.modes
    }

    fn regularize(&self, tau: f64) -> Result<Density> {
        let mut parts = Vec::with_capacity(self.components.len() + 1);
        if let Some(cp) = &self.fock_char {
            parts.push(cp.regularize(tau)?);
        }
        for c in &self.components {
            parts.push(c.regularize(tau)?);
        }
        Density::new(self.modes, parts)
    }
}

impl From<FockOperator> for BosonicState {
    fn from(op: FockOperator) -> Self {
        Self::from_fock(op)
    }
}

/// Library of named single-mode states.
pub mod library {
    use super::*;

    pub fn vacuum() -> BosonicState {
        fock(0).expect("vacuum")
    }

    /// Number state `|n><n|` with one empty headroom level.
    pub fn fock(n: usize) -> Result<BosonicState> {
        let mut d = vec![0.0; n + 2];
        d[n] = 1.0;
        Ok(BosonicState::from_fock(FockOperator::from_diagonal(vec![n + 2], &d)?))
    }

    /// Fock-diagonal mixture with the given weights and one empty headroom level.
    pub fn fock_mix(weights: &[f64]) -> Result<BosonicState> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight list".into()));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter("negative mixture weight".into()));
        }
        let mut diag = weights.to_vec();
        diag.push(0.0);
        let op = FockOperator::from_diagonal(vec![diag.len()], &diag)?;
        op.require_unit_trace()?;
        Ok(BosonicState::from_fock(op))
    }

    /// `(1 - eps)|0><0| + eps|2><2|`
    pub fn vacuum_two_photon(eps: f64) -> Result<BosonicState> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("eps {eps} outside [0, 1]")));
        }
        fock_mix(&[1.0 - eps, 0.0, eps])
    }

    pub fn coherent(z: C64) -> BosonicState {
        BosonicState::analytic(1, vec![PComponent::Point { weight: 1.0, at: CoherentPoint::single(z) }])
            .expect("one mode")
    }

    /// Thermal state of mean photon number `nbar`; its P function is a
    /// Gaussian of variance `nbar` (a point mass at `nbar = 0`).
    pub fn thermal(nbar: f64) -> Result<BosonicState> {
        thermal_modes(nbar, 1)
    }

    pub fn thermal_modes(nbar: f64, modes: usize) -> Result<BosonicState> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::InvalidParameter(format!("mean photon number {nbar} must be >= 0")));
        }
        let origin = CoherentPoint::origin(modes);
        let comp = if nbar == 0.0 {
            PComponent::Point { weight: 1.0, at: origin }
        } else {
            PComponent::Smooth(PolyGaussian::gaussian(&origin, nbar, 1.0)?)
        };
        BosonicState::analytic(modes, vec![comp])
    }

    /// State with `P(z) = (2/pi) e^{-|z|^2} - delta(z)`, i.e. Fock diagonal
    /// `rho_00 = 0`, `rho_nn = 2^{-n}`.
    pub fn diosi() -> BosonicState {
        let origin = CoherentPoint::origin(1);
        BosonicState::analytic(
            1,
            vec![
                PComponent::Smooth(PolyGaussian::gaussian(&origin, 1.0, 2.0).expect("tau > 0")),
                PComponent::Point { weight: -1.0, at: origin },
            ],
        )
        .expect("one mode")
    }

    /// `k|0><2| + |1><1| + k*|2><0|`: unit trace, Hermitian, not positive.
    pub fn operator_a(k: C64) -> Result<BosonicState> {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 2)] = k;
        m[(2, 0)] = k.conj();
        m[(1, 1)] = C64::new(1.0, 0.0);
        Ok(BosonicState::from_fock(FockOperator::new(vec![4], m)?))
    }

    /// Single-mode state with `P(z) = |z|^2 e^{-|z|^2/tau} / (pi tau^2)`,
    /// Fock diagonal `(n+1) tau^n / (1+tau)^{n+2}`.
    pub fn one_photon_added_thermal(tau: f64) -> Result<BosonicState> {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![1u16, 1], C64::new(1.0 / tau, 0.0));
        BosonicState::analytic(1, vec![PComponent::Smooth(PolyGaussian::new(1, tau, coeffs)?)])
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;

    #[test]
    fn thermal_materialises_to_geometric_distribution() {
        let nbar = 0.7;
        let m = thermal(nbar).unwrap().to_fock(&[60]).unwrap();
        for n in 0..10 {
            let expected = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
            assert!((m.operator.matrix()[(n, n)].re - expected).abs() < 1e-15);
        }
        assert!(m.tail_mass < 1e-12);
    }

    #[test]
    fn diosi_diagonal() {
        let m = diosi().to_fock(&[48]).unwrap();
        assert!(m.operator.matrix()[(0, 0)].norm() < 1e-15);
        for n in 1..10 {
            assert!((m.operator.matrix()[(n, n)].re - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        assert!(diosi().to_fock(&[24]).is_err());
        assert_eq!(diosi().auto_dims().unwrap().len(), 1);
    }

    #[test]
    fn one_photon_added_thermal_diagonal() {
        let tau = 0.5;
        let m = one_photon_added_thermal(tau).unwrap().to_fock(&[60]).unwrap();
        for n in 0..8 {
            let expected = (n as f64 + 1.0) * tau.powi(n as i32) / (1.0 + tau).powi(n as i32 + 2);
            assert!((m.operator.matrix()[(n, n)].re - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_point_materialises_to_projector() {
        let z = C64::new(0.6, -0.3);
        let m = coherent(z).to_fock(&[24]).unwrap();
        let ket = crate::fock::coherent_vector(z, 24);
        let diff = m.operator.matrix() - &ket * ket.adjoint();
        assert!(diff.norm() < 1e-15);
    }

    #[test]
    fn analytic_and_materialised_husimi_agree() {
        let s = diosi().mix(0.5, &thermal(0.4).unwrap(), 0.5).unwrap();
        let m = s.to_fock(&[64]).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.5), (-1.2, 0.3)] {
            let z = CoherentPoint::single(C64::new(x, y));
            let a = s.coherent_expectation(&z).unwrap();
            let b = coherent_expectation(&m.operator, &z).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn tensor_of_thermals_shares_envelope() {
        let t = thermal(1.0).unwrap();
        let tt = t.tensor(&t).unwrap();
        assert_eq!(tt.modes(), 2);
        assert!((tt.trace() - 1.0).abs() < 1e-15);
        assert!(t.tensor(&thermal(0.5).unwrap()).is_err());
    }

    #[test]
    fn lambda_map_dilates_components() {
        let (mapped, inflation) = coherent(C64::new(1.0, 0.5)).lambda_map(0.5).unwrap();
        assert_eq!(inflation, 0.0);
        match &mapped.components()[0] {
            PComponent::Point { at, .. } => assert!((at.0[0] - C64::new(0.5, 0.25)).norm() < 1e-15),
            _ => panic!("point expected"),
        }
    }

    #[test]
    fn mode_checks() {
        assert!(
            BosonicState::analytic(2, vec![PComponent::Point { weight: 1.0, at: CoherentPoint::origin(1) }]).is_err()
        );
        assert!(thermal(-1.0).is_err());
        assert!(vacuum_two_photon(1.5).is_err());
    }
}
