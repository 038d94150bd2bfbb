//! Dense Hermitian matrix calculus.
//!
//! Every operator in the crate is a dense complex matrix wrapped in
//! [`HermitianOperator`]. Functions of operators go through a grouped
//! [`SpectralDecomposition`], with the support convention `0^s := 0` applied
//! to eigenvalues below the numerical-rank threshold.

use std::ops::Range;

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Complex scalar type of operator entries.
pub use faer::c64 as Complex;

/// Default relative tolerance for merging nearly equal eigenvalues.
pub const DEFAULT_GROUP_TOL: f64 = 1e-9;

/// Default cap on the dimension of a tensor product.
pub const DEFAULT_SIZE_CAP: usize = 1 << 16;

/// Relative Hermiticity slack absorbed by symmetrization.
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues within this multiple of `1 + ||H||` of zero count as zero when
/// splitting a spectrum by sign.
const SIGN_ZERO_TOL: f64 = 1e-12;

/// A dense complex Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    mat: Mat<c64>,
}

impl HermitianOperator {
    /// Validate and wrap a square matrix.
    ///
    /// Deviations from Hermiticity up to `1e-12 * (1 + max|entry|)` are
    /// absorbed by replacing the matrix with `(A + A*)/2`.
    pub fn new(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { left: mat.nrows(), right: mat.ncols() });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()));
        }
        let n = mat.nrows();
        let mut max_entry = 0.0f64;
        let mut deviation = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let z = mat[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
                max_entry = max_entry.max(z.norm());
                deviation = deviation.max((z - mat[(j, i)].conj()).norm());
            }
        }
        let tolerance = HERMITIAN_TOL * (1.0 + max_entry);
        if deviation > tolerance {
            return Err(Error::NonHermitianInput { deviation, tolerance });
        }
        Ok(Self::symmetrized(mat))
    }

    /// Build from an entry function; the result is validated like [`HermitianOperator::new`].
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        Self::new(Mat::from_fn(dim, dim, f))
    }

    /// Real symmetric matrix from rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix rows must all have length n".into()));
        }
        Self::from_fn(n, |i, j| c64::new(rows[i][j], 0.0))
    }

    /// `(A + A*)/2` without validation, for matrices that are Hermitian up to roundoff
    /// by construction.
    pub(crate) fn symmetrized(mat: Mat<c64>) -> Self {
        let n = mat.nrows();
        let out = Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(mat[(i, i)].re, 0.0)
            } else {
                (mat[(i, j)] + mat[(j, i)].conj()) * 0.5
            }
        });
        Self { mat: out }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: Mat::from_fn(dim, dim, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: Mat::zeros(dim, dim) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            mat: Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) }),
        }
    }

    /// Unnormalized outer product `|v><v|`.
    pub fn outer(v: &[c64]) -> Self {
        let n = v.len();
        Self { mat: Mat::from_fn(n, n, |i, j| v[i] * v[j].conj()) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        self.mat[(i, j)]
    }

    /// The real diagonal when every off-diagonal entry is exactly zero.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                if i != j && self.mat[(i, j)] != c64::new(0.0, 0.0) {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.mat[(i, i)].re).collect())
    }

    pub fn max_abs_entry(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }

    /// Largest entrywise distance to another operator of the same dimension.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        numeric::sum((0..self.dim()).map(|i| self.mat[(i, i)].re))
    }

    /// `Tr(AB)` for Hermitian `A`, `B`; real by Hermiticity.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        check_dims(self, other)?;
        let n = self.dim();
        let mut acc = CompensatedSum::new();
        for j in 0..n {
            for i in 0..n {
                // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
                let a = self.mat[(i, j)];
                let b = other.mat[(i, j)];
                acc.add(a.re * b.re + a.im * b.im);
            }
        }
        Ok(acc.value())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let n = self.dim();
        Self { mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] * c) }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_dims(self, other)?;
        let n = self.dim();
        Ok(Self { mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] * a + other.mat[(i, j)] * b) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Plain matrix product; not Hermitian in general.
    pub fn product(&self, other: &Self) -> Result<Mat<c64>> {
        check_dims(self, other)?;
        Ok(&self.mat * &other.mat)
    }

    /// `X* A X` for an arbitrary square `X`.
    pub fn congruence(&self, x: MatRef<'_, c64>) -> Self {
        let ax = &self.mat * x;
        Self::symmetrized(x.adjoint() * &ax)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let vals = self
            .mat
            .as_ref()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::NumericalFailure(format!("{e:?}")))?;
        Ok(vals)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn spectral_decompose(&self, group_tol: f64) -> Result<SpectralDecomposition> {
        spectral_decompose(self, group_tol)
    }

    /// Trace norm `Tr|A|`.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(numeric::sum(self.eigenvalues()?.into_iter().map(f64::abs)))
    }

    /// Whether every eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Tensor product with the default size cap.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        kron(self, other)
    }
}

fn check_dims(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Eigenvalues grouped into distinct levels, each with an orthonormal
/// eigenbasis of its eigenspace.
///
/// Projections are materialized on demand; large decompositions keep only
/// the eigenvector matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    groups: Vec<Range<usize>>,
    vectors: Mat<c64>,
    spectral_norm: f64,
}

impl SpectralDecomposition {
    /// Distinct eigenvalues, strictly ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Orthonormal eigenvectors as columns, ordered to match [`Self::group_range`].
    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    /// Columns of [`Self::vectors`] spanning the `i`-th eigenspace.
    pub fn group_range(&self, i: usize) -> Range<usize> {
        self.groups[i].clone()
    }

    pub fn multiplicity(&self, i: usize) -> usize {
        self.groups[i].len()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// Largest eigenvalue (zero for an empty spectrum).
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Eigenprojection of the `i`-th level.
    pub fn projection(&self, i: usize) -> Projection {
        let cols = self.vectors.as_ref().subcols(self.groups[i].start, self.groups[i].len());
        Projection { op: HermitianOperator::symmetrized(cols * cols.adjoint()), rank: self.groups[i].len() }
    }

    pub fn projections(&self) -> Vec<Projection> {
        (0..self.len()).map(|i| self.projection(i)).collect()
    }

    /// `Σ λ_i P_i`.
    pub fn reconstruct(&self) -> HermitianOperator {
        self.apply(|x| x)
    }

    /// `Σ f(λ_i) P_i`.
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> HermitianOperator {
        let weights: Vec<f64> = self
            .groups
            .iter()
            .zip(&self.eigenvalues)
            .flat_map(|(g, &l)| {
                let w = f(l);
                std::iter::repeat_n(w, g.len())
            })
            .collect();
        self.weighted_outer(&weights)
    }

    fn weighted_outer(&self, weights: &[f64]) -> HermitianOperator {
        let n = self.dim();
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != 0.0).collect();
        if keep.is_empty() {
            return HermitianOperator::zeros(n);
        }
        let u = Mat::from_fn(n, keep.len(), |i, k| self.vectors[(i, keep[k])]);
        let uw = Mat::from_fn(n, keep.len(), |i, k| self.vectors[(i, keep[k])] * weights[keep[k]]);
        HermitianOperator::symmetrized(&uw * u.adjoint())
    }

    /// Zero threshold for a positive semidefinite spectrum: `dim * 1e-12 * λ_max`.
    pub fn zero_threshold(&self) -> f64 {
        self.dim() as f64 * 1e-12 * self.max_eigenvalue().max(0.0)
    }

    /// Indices of levels counted as strictly positive under [`Self::zero_threshold`].
    pub fn support_levels(&self) -> Vec<usize> {
        let thr = self.zero_threshold();
        (0..self.len()).filter(|&i| self.eigenvalues[i] > thr).collect()
    }

    /// Projection onto the span of the positive levels.
    pub fn support_projection(&self) -> Projection {
        let thr = self.zero_threshold();
        let weights = self.column_weights(|l| if l > thr { 1.0 } else { 0.0 });
        let rank = weights.iter().filter(|&&w| w != 0.0).count();
        Projection { op: self.weighted_outer(&weights), rank }
    }

    fn column_weights(&self, mut f: impl FnMut(f64) -> f64) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for (g, &l) in self.groups.iter().zip(&self.eigenvalues) {
            let v = f(l);
            for k in g.clone() {
                w[k] = v;
            }
        }
        w
    }

    /// Fractional power with the support convention.
    pub fn power(&self, s: f64) -> HermitianOperator {
        let thr = self.zero_threshold();
        let weights = self.column_weights(|l| if l > thr { l.powf(s) } else { 0.0 });
        self.weighted_outer(&weights)
    }
}

/// Grouped eigendecomposition of a Hermitian operator.
///
/// Consecutive eigenvalues closer than `group_tol * (1 + ||H||)` are merged into
/// one level; the level value is the mean of its members.
pub fn spectral_decompose(h: &HermitianOperator, group_tol: f64) -> Result<SpectralDecomposition> {
    if !(group_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("group tolerance {group_tol} must be nonnegative")));
    }
    let evd = h
        .mat
        .as_ref()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("{e:?}")))?;
    let raw: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    let spectral_norm = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = group_tol * (1.0 + spectral_norm);
    let mut groups: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for k in 1..=raw.len() {
        if k == raw.len() || raw[k] - raw[k - 1] > tol {
            groups.push(start..k);
            start = k;
        }
    }
    let eigenvalues = groups.iter().map(|g| numeric::sum(raw[g.clone()].iter().copied()) / g.len() as f64).collect();
    Ok(SpectralDecomposition { eigenvalues, groups, vectors: evd.U().to_owned(), spectral_norm })
}

/// A Hermitian idempotent.
#[derive(Clone, Debug)]
pub struct Projection {
    op: HermitianOperator,
    rank: usize,
}

impl Projection {
    /// Validate `P² = P` (within `1e-10`) and spectrum in {0, 1} (within `1e-8`).
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let sq = HermitianOperator::symmetrized(op.product(&op)?);
        let dev = sq.max_abs_diff(&op);
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!("not idempotent (deviation {dev:e})")));
        }
        let eig = op.eigenvalues()?;
        if eig.iter().any(|&l| l.abs() > 1e-8 && (l - 1.0).abs() > 1e-8) {
            return Err(Error::InvalidArgument("projection spectrum not in {0, 1}".into()));
        }
        let rank = eig.iter().filter(|&&l| l > 0.5).count();
        Ok(Self { op, rank })
    }

    /// Projection onto the span of orthonormal columns, trusted without re-validation.
    pub(crate) fn from_orthonormal_columns(u: MatRef<'_, c64>) -> Self {
        if u.ncols() == 0 {
            return Self::zeros(u.nrows());
        }
        Self { op: HermitianOperator::symmetrized(u * u.adjoint()), rank: u.ncols() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { op: HermitianOperator::zeros(dim), rank: 0 }
    }

    pub fn identity(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim), rank: dim }
    }

    /// Projection onto the span of the given (not necessarily orthonormal) vectors.
    pub fn onto_span(vectors: &[Vec<c64>]) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("empty span".into()))?;
        let mut gram = HermitianOperator::zeros(dim);
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: v.len() });
            }
            gram = gram.add(&HermitianOperator::outer(v))?;
        }
        Ok(spectral_decompose(&gram, DEFAULT_GROUP_TOL)?.support_projection())
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `I - P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self { op: HermitianOperator::identity(n).sub(&self.op).expect("same dimension"), rank: n - self.rank }
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        Ok(Self { op: kron(&self.op, &other.op)?, rank: self.rank * other.rank })
    }
}

/// `Σ_{λ>0} λ^s P_λ` for a positive semidefinite `A`; `s = 0` gives the support projection.
pub fn fractional_power(a: &HermitianOperator, s: f64) -> Result<HermitianOperator> {
    let dec = psd_decompose(a)?;
    Ok(dec.power(s))
}

/// Decompose a positive semidefinite operator, rejecting clearly negative spectra.
pub fn psd_decompose(a: &HermitianOperator) -> Result<SpectralDecomposition> {
    let dec = spectral_decompose(a, DEFAULT_GROUP_TOL)?;
    let min = dec.eigenvalues().first().copied().unwrap_or(0.0);
    if min < -1e-8 * dec.spectral_norm() {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    Ok(dec)
}

/// Positive spectral projection together with the number of eigenvalues that
/// sat within the zero band and were excluded.
#[derive(Clone, Debug)]
pub struct PositivePart {
    pub projection: Projection,
    /// Eigenvalues with `|λ| <= 1e-12 (1 + ||H||)`.
    pub boundary_eigenvalues: usize,
    /// Raw eigenvalues of `H`, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `{H > 0}` with diagnostics about eigenvalues in the zero band.
pub fn positive_part(h: &HermitianOperator) -> Result<PositivePart> {
    let dec = spectral_decompose(h, 0.0)?;
    let zero = SIGN_ZERO_TOL * (1.0 + dec.spectral_norm());
    let weights = dec.column_weights(|l| if l > zero { 1.0 } else { 0.0 });
    let rank = weights.iter().filter(|&&w| w != 0.0).count();
    let boundary = dec.eigenvalues().iter().filter(|l| l.abs() <= zero).count();
    let eigenvalues = dec.eigenvalues().to_vec();
    Ok(PositivePart { projection: Projection { op: dec.weighted_outer(&weights), rank }, boundary_eigenvalues: boundary, eigenvalues })
}

/// The spectral projection of `H` onto its strictly positive part.
pub fn positive_spectral_projection(h: &HermitianOperator) -> Result<Projection> {
    Ok(positive_part(h)?.projection)
}

/// `½Tr(A+B) − ½Tr|A−B|`, the minimum of `Tr A(I−T) + Tr BT` over `0 ≤ T ≤ I`.
pub fn min_trace_overlap(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    let diff = a.sub(b)?;
    Ok(0.5 * (a.trace() + b.trace()) - 0.5 * diff.trace_norm()?)
}

/// Result of the trace-maximization dual of the testing problem.
#[derive(Clone, Debug)]
pub struct MinDuality {
    /// `max{Tr X : X ≤ A, X ≤ B}`.
    pub value: f64,
    /// `X = A(I−S) + BS` with `S = {A−B > 0}`.
    pub witness: HermitianOperator,
    pub witness_min_eigenvalue: f64,
    pub witness_psd: bool,
}

/// Evaluate the dual form `max{Tr X : X ≤ A, X ≤ B}` and its optimizer.
pub fn operator_min_duality(a: &HermitianOperator, b: &HermitianOperator) -> Result<MinDuality> {
    check_dims(a, b)?;
    let s = positive_spectral_projection(&a.sub(b)?)?;
    let comp = s.complement();
    let ax = a.product(comp.operator())?;
    let bx = b.product(s.operator())?;
    let witness = HermitianOperator::symmetrized(&ax + &bx);
    let witness_min_eigenvalue = witness.min_eigenvalue()?;
    Ok(MinDuality {
        value: witness.trace(),
        witness,
        witness_min_eigenvalue,
        witness_psd: witness_min_eigenvalue >= -1e-10,
    })
}

/// `Tr A^s B^{1−s}` evaluated through explicit matrix powers.
pub fn trace_power_product(a: &HermitianOperator, b: &HermitianOperator, s: f64) -> Result<f64> {
    check_dims(a, b)?;
    let pa = fractional_power(a, s)?;
    let pb = fractional_power(b, 1.0 - s)?;
    pa.trace_product(&pb)
}

/// Tensor product with the default cap of `2^16` on the result dimension.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    kron_capped(a, b, DEFAULT_SIZE_CAP)
}

/// Tensor product `A ⊗ B`, left factor major.
pub fn kron_capped(a: &HermitianOperator, b: &HermitianOperator, cap: usize) -> Result<HermitianOperator> {
    let (m, n) = (a.dim(), b.dim());
    let dim = m.saturating_mul(n);
    if dim > cap {
        return Err(Error::SizeOverflow { requested: dim, cap });
    }
    let mut out = Mat::<c64>::zeros(dim, dim);
    for ja in 0..m {
        for ia in 0..m {
            let x = a.mat[(ia, ja)];
            if x == c64::new(0.0, 0.0) {
                continue;
            }
            for jb in 0..n {
                for ib in 0..n {
                    out[(ia * n + ib, ja * n + jb)] = x * b.mat[(ib, jb)];
                }
            }
        }
    }
    Ok(HermitianOperator { mat: out })
}

/// `A^{⊗n}` (identity of dimension 1 for `n = 0`).
pub fn kron_power(a: &HermitianOperator, n: usize, cap: usize) -> Result<HermitianOperator> {
    let mut out = HermitianOperator::identity(1);
    for _ in 0..n {
        out = kron_capped(&out, a, cap)?;
    }
    Ok(out)
}

/// Partial trace over the last tensor factor of dimension `last`.
pub fn partial_trace_last(h: &HermitianOperator, last: usize) -> Result<HermitianOperator> {
    let n = h.dim();
    if last == 0 || !n.is_multiple_of(last) {
        return Err(Error::InvalidArgument(format!("cannot trace out a factor of dimension {last} from {n}")));
    }
    let m = n / last;
    Ok(HermitianOperator::symmetrized(Mat::from_fn(m, m, |i, j| {
        let mut z = c64::new(0.0, 0.0);
        for k in 0..last {
            z += h.mat[(i * last + k, j * last + k)];
        }
        z
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_psd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn identity_is_a_single_level() {
        let dec = spectral_decompose(&HermitianOperator::identity(2), 1e-9).unwrap();
        assert_eq!(dec.eigenvalues().len(), 1);
        assert!((dec.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!(dec.projection(0).operator().max_abs_diff(&HermitianOperator::identity(2)) < 1e-12);
    }

    #[test]
    fn diagonal_splits_into_coordinate_projections() {
        let dec = spectral_decompose(&HermitianOperator::diagonal(&[1.0, 2.0]), 1e-9).unwrap();
        assert_eq!(dec.eigenvalues(), &[1.0, 2.0]);
        let p0 = dec.projection(0);
        assert!(p0.operator().max_abs_diff(&HermitianOperator::diagonal(&[1.0, 0.0])) < 1e-12);
        let p1 = dec.projection(1);
        assert!(p1.operator().max_abs_diff(&HermitianOperator::diagonal(&[0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn random_decomposition_satisfies_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 8);
        let dec = spectral_decompose(&h, DEFAULT_GROUP_TOL).unwrap();
        let residual = dec.reconstruct().max_abs_diff(&h);
        assert!(residual <= 1e-9 * dec.spectral_norm(), "residual {residual}");
        let ps = dec.projections();
        let mut sum = HermitianOperator::zeros(8);
        for (i, p) in ps.iter().enumerate() {
            sum = sum.add(p.operator()).unwrap();
            let sq = HermitianOperator::symmetrized(p.operator().product(p.operator()).unwrap());
            assert!(sq.max_abs_diff(p.operator()) < 1e-10);
            for q in &ps[i + 1..] {
                let pq = p.operator().product(q.operator()).unwrap();
                let mut worst = 0.0f64;
                for jj in 0..8 {
                    for ii in 0..8 {
                        worst = worst.max(pq[(ii, jj)].norm());
                    }
                }
                assert!(worst < 1e-10);
            }
        }
        assert!(sum.max_abs_diff(&HermitianOperator::identity(8)) < 1e-10);
        assert!(dec.eigenvalues().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn nearly_hermitian_input_is_symmetrized_and_gross_violation_rejected() {
        let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(0.5, 1e-14),
            (1, 0) => c(0.5, 0.0),
            _ => c(1.0, 0.0),
        });
        let h = HermitianOperator::new(m).unwrap();
        assert_eq!(h.entry(0, 1), h.entry(1, 0).conj());
        let bad = Mat::from_fn(2, 2, |i, j| if (i, j) == (0, 1) { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(matches!(HermitianOperator::new(bad), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn fractional_power_examples() {
        let half = HermitianOperator::identity(2).scaled(0.5);
        let p0 = fractional_power(&half, 0.0).unwrap();
        assert!(p0.max_abs_diff(&HermitianOperator::identity(2)) < 1e-12);
        let a = HermitianOperator::diagonal(&[4.0, 0.0]);
        let r = fractional_power(&a, 0.5).unwrap();
        assert!(r.max_abs_diff(&HermitianOperator::diagonal(&[2.0, 0.0])) < 1e-12);
        // 0^0 := 0: the support projection, not the identity
        let s = fractional_power(&a, 0.0).unwrap();
        assert!(s.max_abs_diff(&HermitianOperator::diagonal(&[1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn fractional_power_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_psd(&mut rng, 4, 4);
        let x = fractional_power(&a, 0.3).unwrap();
        let y = fractional_power(&a, 0.7).unwrap();
        let prod = HermitianOperator::symmetrized(x.product(&y).unwrap());
        assert!(prod.max_abs_diff(&a) <= 1e-9);
        let one = fractional_power(&a, 1.0).unwrap();
        assert!(one.max_abs_diff(&a) < 1e-10);
        let s0 = fractional_power(&a, 0.0).unwrap();
        let s00 = fractional_power(&s0, 0.0).unwrap();
        assert!(s00.max_abs_diff(&s0) < 1e-10);
    }

    #[test]
    fn fractional_power_rejects_negative_spectrum() {
        let a = HermitianOperator::diagonal(&[1.0, -0.5]);
        assert!(matches!(fractional_power(&a, 0.5), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn positive_projection_examples() {
        let p = positive_spectral_projection(&HermitianOperator::diagonal(&[1.0, -1.0])).unwrap();
        assert!(p.operator().max_abs_diff(&HermitianOperator::diagonal(&[1.0, 0.0])) < 1e-12);
        let z = positive_spectral_projection(&HermitianOperator::zeros(3)).unwrap();
        assert_eq!(z.rank(), 0);
        assert!(z.operator().max_abs_entry() == 0.0);
    }

    #[test]
    fn positive_projection_of_pure_state_difference() {
        let h2 = std::f64::consts::FRAC_1_SQRT_2;
        let rho = HermitianOperator::outer(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let sigma = HermitianOperator::outer(&[c(h2, 0.0), c(h2, 0.0)]);
        let h = rho.sub(&sigma).unwrap();
        let s = positive_spectral_projection(&h).unwrap();
        assert_eq!(s.rank(), 1);
        // eigenvalues of |0><0| - |+><+| are ±1/√2
        let gain = h.trace_product(s.operator()).unwrap();
        let half_norm = 0.5 * h.trace_norm().unwrap();
        assert!((gain - h2).abs() < 1e-12);
        assert!((half_norm - h2).abs() < 1e-12);
    }

    #[test]
    fn min_trace_overlap_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = crate::random::random_density(&mut rng, 3, 3);
        assert!((min_trace_overlap(rho.operator(), rho.operator()).unwrap() - 1.0).abs() < 1e-12);
        let a = HermitianOperator::diagonal(&[1.0, 0.0]);
        let b = HermitianOperator::diagonal(&[0.0, 1.0]);
        assert!(min_trace_overlap(&a, &b).unwrap().abs() < 1e-14);
        assert!(matches!(
            min_trace_overlap(&a, &HermitianOperator::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duality_commuting_and_identical() {
        let a = HermitianOperator::diagonal(&[0.3, 0.9, 0.1]);
        let b = HermitianOperator::diagonal(&[0.5, 0.2, 0.1]);
        let d = operator_min_duality(&a, &b).unwrap();
        assert!((d.value - (0.3 + 0.2 + 0.1)).abs() < 1e-12);
        assert!(d.witness_psd);
        let d = operator_min_duality(&a, &a).unwrap();
        assert!((d.value - a.trace()).abs() < 1e-12);
        assert!(d.witness.max_abs_diff(&a) < 1e-12);
        assert!(d.witness_psd);
    }

    #[test]
    fn duality_counterexample_has_negative_witness() {
        let a = HermitianOperator::outer(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let b = HermitianOperator::outer(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let d = operator_min_duality(&a, &b).unwrap();
        assert!(!d.witness_psd);
        assert!(d.witness_min_eigenvalue < -1e-3);
        assert!((d.value - min_trace_overlap(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kron_examples() {
        let i4 = kron(&HermitianOperator::identity(2), &HermitianOperator::identity(2)).unwrap();
        assert!(i4.max_abs_diff(&HermitianOperator::identity(4)) == 0.0);
        let e = HermitianOperator::diagonal(&[1.0, 0.0]);
        assert!(kron(&e, &e).unwrap().max_abs_diff(&HermitianOperator::diagonal(&[1.0, 0.0, 0.0, 0.0])) == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3);
        let ab = kron(&a, &b).unwrap();
        assert!((ab.trace() - a.trace() * b.trace()).abs() <= 1e-12 * (1.0 + ab.trace().abs()));
        assert!(matches!(kron_capped(&a, &b, 8), Err(Error::SizeOverflow { requested: 9, cap: 8 })));
    }

    #[test]
    fn partial_trace_inverts_kron_with_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = crate::random::random_density(&mut rng, 3, 3);
        let b = crate::random::random_density(&mut rng, 2, 2);
        let ab = kron(a.operator(), b.operator()).unwrap();
        let back = partial_trace_last(&ab, 2).unwrap();
        assert!(back.max_abs_diff(a.operator()) < 1e-14);
    }
}
