//! Operators on a truncated multimode Fock space.
//!
//! The basis is the tensor product of per-mode number bases `|0>, .., |d-1>`,
//! flattened row-major with mode 1 as the slowest index. Every state, witness
//! and test operator in the crate is carried by a [`FockOperator`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for the Hermitian flag, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance of the unit-trace predicate.
pub const UNIT_TRACE_TOL: f64 = 1e-10;

/// A point in multimode phase space, one complex amplitude per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentPoint(pub Vec<C64>);

impl CoherentPoint {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn single(z: C64) -> Self {
        Self(vec![z])
    }

    pub fn origin(modes: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); modes])
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|z| z * factor).collect())
    }

    /// Flattened `[re, im, re, im, ..]` view used by the JSON outputs.
    pub fn to_re_im(&self) -> Vec<f64> {
        self.0.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn check_modes(&self, modes: usize) -> Result<()> {
        if self.modes() != modes {
            return Err(Error::ModeMismatch { expected: modes, got: self.modes() });
        }
        Ok(())
    }
}

/// Hermitian (or general) operator on a truncated multimode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("at least one mode is required".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidParameter(format!("mode dimension {d} < 2")));
        }
        let size: usize = dims.iter().product();
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} need a {size}x{size} matrix, got {}x{}",
                dims,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let hermitian = hermitian_deviation(&matrix) <= HERMITIAN_TOL * max_abs(&matrix).max(1.0);
        Ok(Self { dims, matrix, hermitian })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let size = dims.iter().product();
        Self::new(dims, DMatrix::zeros(size, size))
    }

    pub fn from_diagonal(dims: Vec<usize>, diagonal: &[f64]) -> Result<Self> {
        let size: usize = dims.iter().product();
        if diagonal.len() > size {
            return Err(Error::DimensionMismatch(format!(
                "{} diagonal entries for a space of size {size}",
                diagonal.len()
            )));
        }
        let mut m = DMatrix::zeros(size, size);
        for (i, &w) in diagonal.iter().enumerate() {
            m[(i, i)] = C64::new(w, 0.0);
        }
        Self::new(dims, m)
    }

    /// Projector `|psi><psi|` onto a (not necessarily normalised) ket.
    pub fn projector(dims: Vec<usize>, ket: &DVector<C64>) -> Result<Self> {
        let m = ket * ket.adjoint();
        Self::new(dims, m)
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if !self.hermitian {
            return Err(Error::NotHermitian(hermitian_deviation(&self.matrix)));
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn is_unit_trace(&self) -> bool {
        (self.trace() - C64::new(1.0, 0.0)).norm() <= UNIT_TRACE_TOL
    }

    pub fn require_unit_trace(&self) -> Result<()> {
        if !self.is_unit_trace() {
            return Err(Error::NotUnitTrace(self.trace().re));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { dims: self.dims.clone(), matrix: &self.matrix * C64::new(factor, 0.0), hermitian: self.hermitian }
    }

    /// `alpha * self + beta * other`.
    pub fn scale_add(&self, alpha: f64, other: &FockOperator, beta: f64) -> Result<Self> {
        self.check_same_space(other)?;
        let m = &self.matrix * C64::new(alpha, 0.0) + &other.matrix * C64::new(beta, 0.0);
        Self::new(self.dims.clone(), m)
    }

    pub fn check_same_space(&self, other: &FockOperator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    /// Flat basis index of a per-mode photon-number tuple.
    pub fn flat_index(&self, numbers: &[usize]) -> usize {
        flat_index(&self.dims, numbers)
    }

    /// Per-mode photon numbers of a flat basis index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(&self.dims, flat)
    }

    /// Entry `<row|A|col>` addressed by photon-number tuples.
    pub fn entry(&self, row: &[usize], col: &[usize]) -> C64 {
        self.matrix[(self.flat_index(row), self.flat_index(col))]
    }

    /// Non-zero entries as `(row, col, value)` in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let n = self.size();
        (0..n).flat_map(move |r| (0..n).map(move |c| (r, c))).filter_map(move |(r, c)| {
            let v = self.matrix[(r, c)];
            (v.re != 0.0 || v.im != 0.0).then_some((r, c, v))
        })
    }

    /// Zero-pads the operator into a space with larger per-mode cutoffs.
    pub fn embed(&self, dims: &[usize]) -> Result<Self> {
        if dims.len() != self.modes() {
            return Err(Error::ModeMismatch { expected: self.modes(), got: dims.len() });
        }
        if dims.iter().zip(&self.dims).any(|(new, old)| new < old) {
            return Err(Error::DimensionMismatch(format!("cannot shrink {:?} to {:?}", self.dims, dims)));
        }
        let size: usize = dims.iter().product();
        let mut m = DMatrix::zeros(size, size);
        for (r, c, v) in self.nonzeros() {
            let rr = flat_index(dims, &self.multi_index(r));
            let cc = flat_index(dims, &self.multi_index(c));
            m[(rr, cc)] = v;
        }
        Self::new(dims.to_vec(), m)
    }

    /// Tensor product `self ⊗ other`; the modes of `self` come first.
    pub fn tensor(&self, other: &FockOperator) -> Result<Self> {
        let m = self.matrix.kronecker(&other.matrix);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(dims, m)
    }

    /// Transposes the bra and ket indices of a single mode.
    pub fn partial_transpose(&self, mode: usize) -> Result<Self> {
        if mode >= self.modes() {
            return Err(Error::InvalidParameter(format!("mode {mode} out of range for {} modes", self.modes())));
        }
        let n = self.size();
        let mut out = DMatrix::zeros(n, n);
        for r in 0..n {
            let mut ri = self.multi_index(r);
            for c in 0..n {
                let v = self.matrix[(r, c)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let mut ci = self.multi_index(c);
                std::mem::swap(&mut ri[mode], &mut ci[mode]);
                out[(self.flat_index(&ri), self.flat_index(&ci))] = v;
                std::mem::swap(&mut ri[mode], &mut ci[mode]);
            }
        }
        Self::new(self.dims.clone(), out)
    }

    /// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
    pub fn eigen_hermitian(&self) -> Result<Spectrum> {
        self.require_hermitian()?;
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.size(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectrum { values, vectors })
    }

    /// Eigenvalues of a Hermitian operator computed block by block over the
    /// connected components of its sparsity pattern.
    pub fn eigenvalues_blocked(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        Ok(hermitian_eigenvalues_blocked(&self.matrix))
    }
}

/// Ascending eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// `V diag(values) V†`
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        let out = &scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }
}

pub fn flat_index(dims: &[usize], numbers: &[usize]) -> usize {
    numbers.iter().zip(dims).fold(0, |acc, (&n, &d)| acc * d + n)
}

pub fn multi_index(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = flat % d;
        flat /= d;
    }
    out
}

/// Truncated coherent-state amplitudes `<n|z> = e^{-|z|^2/2} z^n / sqrt(n!)`.
///
/// The vector is not renormalised, so its norm is below one by the Poisson
/// tail beyond the cutoff.
pub fn coherent_vector(z: C64, dim: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    if dim == 0 {
        return v;
    }
    v[0] = C64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 1..dim {
        v[n] = v[n - 1] * z / (n as f64).sqrt();
    }
    v
}

/// Multimode truncated coherent vector on the tensor basis of `dims`.
pub fn coherent_ket(point: &CoherentPoint, dims: &[usize]) -> Result<DVector<C64>> {
    point.check_modes(dims.len())?;
    let mut ket = DVector::from_element(1, C64::new(1.0, 0.0));
    for (z, &d) in point.0.iter().zip(dims) {
        ket = ket.kronecker(&coherent_vector(*z, d));
    }
    Ok(ket)
}

/// `<z|rho|z>` with truncated coherent vectors.
pub fn coherent_expectation(rho: &FockOperator, point: &CoherentPoint) -> Result<f64> {
    rho.require_hermitian()?;
    let ket = coherent_ket(point, rho.dims())?;
    let value = (ket.adjoint() * rho.matrix() * &ket)[(0, 0)];
    // roundoff in the imaginary part scales with the entries, not the result
    debug_assert!(value.im.abs() <= 1e-12 * (1.0 + rho.matrix().norm()) * (1.0 + ket.norm_squared()));
    Ok(value.re)
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

/// Eigenvalues of a Hermitian matrix, exploiting block-diagonal structure
/// hidden by a permutation. Ascending order.
pub fn hermitian_eigenvalues_blocked(m: &DMatrix<C64>) -> Vec<f64> {
    let mut values = Vec::with_capacity(m.nrows());
    for idx in coupled_blocks(&[m]) {
        values.extend(block_eigenvalues(m, &idx));
    }
    values.sort_by(f64::total_cmp);
    values
}

/// Index sets of the connected components of the joint sparsity graph of
/// equally sized square matrices, each sorted, in order of smallest index.
pub fn coupled_blocks(ms: &[&DMatrix<C64>]) -> Vec<Vec<usize>> {
    let n = ms.first().map_or(0, |m| m.nrows());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in ms {
        for c in 0..n {
            for r in 0..c {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut blocks: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        blocks.entry(root).or_default().push(i);
    }
    blocks.into_values().collect()
}

/// Eigenvalues of the principal submatrix on `idx` (unsorted).
pub fn block_eigenvalues(m: &DMatrix<C64>, idx: &[usize]) -> Vec<f64> {
    if idx.len() == 1 {
        return vec![m[(idx[0], idx[0])].re];
    }
    let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
    nalgebra::SymmetricEigen::new(block).eigenvalues.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn coherent_vector_examples() {
        let v = coherent_vector(c(0.0), 4);
        assert_eq!(v.as_slice(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);

        let v = coherent_vector(c(1.0), 2);
        let e = (-0.5f64).exp();
        assert!((v[0].re - e).abs() < 1e-15 && (v[1].re - e).abs() < 1e-15);

        // Poisson tail beyond the cutoff, summed independently.
        let z2: f64 = 0.25;
        let mut term = (-z2).exp();
        let mut tail = 0.0;
        for n in 0..80 {
            if n >= 16 {
                tail += term;
            }
            term *= z2 / (n + 1) as f64;
        }
        assert!(tail < 1e-12);
        let v = coherent_vector(c(0.5), 16);
        assert!((v.norm_squared() - (1.0 - tail)).abs() < 1e-15);
    }

    #[test]
    fn coherent_expectation_examples() {
        let vac = FockOperator::from_diagonal(vec![4], &[1.0]).unwrap();
        assert!((coherent_expectation(&vac, &CoherentPoint::single(c(0.0))).unwrap() - 1.0).abs() < 1e-15);

        let one = FockOperator::from_diagonal(vec![4], &[0.0, 1.0]).unwrap();
        let z = CoherentPoint::single(C64::from_polar(1.0, 0.7));
        let q = coherent_expectation(&one, &z).unwrap();
        assert!((q - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let vac = FockOperator::from_diagonal(vec![3], &[1.0]).unwrap();
        let err = coherent_expectation(&vac, &CoherentPoint::origin(2)).unwrap_err();
        assert!(matches!(err, Error::ModeMismatch { .. }));
    }

    #[test]
    fn eigen_of_mapped_fock_mixture() {
        let (eps, a): (f64, f64) = (0.1, 1.2);
        let a2 = a * a;
        let diag = [1.0 - 2.0 * eps * a2 + eps * a2 * a2, 2.0 * eps * a2 * (1.0 - a2), eps * a2 * a2];
        let op = FockOperator::from_diagonal(vec![3], &diag).unwrap();
        let spec = op.eigen_hermitian().unwrap();
        let mut sorted = diag.to_vec();
        sorted.sort_by(f64::total_cmp);
        for (x, y) in spec.values.iter().zip(&sorted) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(spec.min() < 0.0);
    }

    #[test]
    fn eigen_of_identity_and_operator_a() {
        let id = FockOperator::from_diagonal(vec![2, 2], &[0.25; 4]).unwrap();
        for v in id.eigen_hermitian().unwrap().values {
            assert!((v - 0.25).abs() < 1e-15);
        }

        let k = 0.5;
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 2)] = c(k);
        m[(2, 0)] = c(k);
        m[(1, 1)] = c(1.0);
        let a = FockOperator::new(vec![3], m).unwrap();
        let spec = a.eigen_hermitian().unwrap();
        assert!((spec.values[0] + 0.5).abs() < 1e-14);
        assert!((spec.values[1] - 0.5).abs() < 1e-14);
        assert!((spec.values[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_eigen_is_an_error() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        let op = FockOperator::new(vec![2], m).unwrap();
        assert!(!op.is_hermitian());
        assert!(matches!(op.eigen_hermitian(), Err(Error::NotHermitian(_))));
    }

    fn werner(p: f64) -> FockOperator {
        let mut m = DMatrix::from_diagonal_element(4, 4, c((1.0 - p) / 4.0));
        for &(r, cc) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(r, cc)] += c(p / 2.0);
        }
        FockOperator::new(vec![2, 2], m).unwrap()
    }

    #[test]
    fn partial_transpose_of_bell_mixture() {
        // p = 1: PT of the Bell projector is the swap / 2, spectrum {-1/2, 1/2 x3}.
        let pt = werner(1.0).partial_transpose(1).unwrap();
        let spec = pt.eigen_hermitian().unwrap();
        assert!((spec.min() + 0.5).abs() < 1e-14);
        let pt = werner(1.0 / 3.0).partial_transpose(1).unwrap();
        assert!(pt.eigen_hermitian().unwrap().min().abs() < 1e-15);
    }

    #[test]
    fn partial_transpose_of_product() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 0)] = c(0.6);
        b[(1, 1)] = c(0.4);
        b[(0, 1)] = C64::new(0.1, 0.2);
        b[(1, 0)] = C64::new(0.1, -0.2);
        let sb = FockOperator::new(vec![2], b.clone()).unwrap();
        let sa = FockOperator::from_diagonal(vec![2], &[0.3, 0.7]).unwrap();
        let prod = sa.tensor(&sb).unwrap();
        let expected = sa.tensor(&FockOperator::new(vec![2], b.transpose()).unwrap()).unwrap();
        let pt = prod.partial_transpose(1).unwrap();
        assert!((pt.matrix() - expected.matrix()).norm() < 1e-15);
        let s1 = prod.eigen_hermitian().unwrap().values;
        let s2 = pt.eigen_hermitian().unwrap().values;
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn blocked_spectrum_matches_dense() {
        let w = werner(0.8).embed(&[4, 3]).unwrap();
        let pt = w.partial_transpose(1).unwrap();
        let dense = pt.eigen_hermitian().unwrap().values;
        let blocked = pt.eigenvalues_blocked().unwrap();
        for (x, y) in dense.iter().zip(&blocked) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn index_round_trip_and_embedding() {
        let dims = [3, 4, 2];
        for flat in 0..24 {
            assert_eq!(flat_index(&dims, &multi_index(&dims, flat)), flat);
        }
        let w = werner(1.0);
        let e = w.embed(&[3, 5]).unwrap();
        assert_eq!(e.entry(&[1, 1], &[0, 0]), c(0.5));
        assert!((e.trace().re - 1.0).abs() < 1e-15);
        assert!(w.embed(&[1, 5]).is_err());
    }

    #[test]
    fn unit_trace_and_dims_validation() {
        assert!(FockOperator::from_diagonal(vec![2], &[FRAC_1_SQRT_2; 2]).unwrap().trace().re > 1.0);
        assert!(FockOperator::from_diagonal(vec![2], &[0.5, 0.5]).unwrap().is_unit_trace());
        assert!(FockOperator::zeros(vec![1]).is_err());
        assert!(FockOperator::new(vec![2], DMatrix::zeros(3, 3)).is_err());
    }
}
