//! Seeded generators for random operators, states and tests.
//!
//! All draws go through a caller-supplied RNG so test corpora are
//! reproducible from a single seed.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::operator::HermitianOperator;
use crate::state::DensityOperator;

fn gaussian(rng: &mut impl Rng) -> c64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64::new(re, im)
}

/// `dim × cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rng: &mut impl Rng, dim: usize, cols: usize) -> Mat<c64> {
    Mat::from_fn(dim, cols, |_, _| gaussian(rng))
}

/// GUE-like random Hermitian matrix.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> HermitianOperator {
    let g = ginibre(rng, dim, dim);
    HermitianOperator::symmetrized(Mat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5))
}

/// Random positive semidefinite `G G*` of the given rank.
pub fn random_psd(rng: &mut impl Rng, dim: usize, rank: usize) -> HermitianOperator {
    let g = ginibre(rng, dim, rank.max(1));
    HermitianOperator::symmetrized(&g * g.adjoint())
}

/// Random density operator of the given rank (Hilbert–Schmidt measure for full rank).
pub fn random_density(rng: &mut impl Rng, dim: usize, rank: usize) -> DensityOperator {
    let p = random_psd(rng, dim, rank);
    let t = p.trace();
    DensityOperator::from_operator_unchecked(p.scaled(1.0 / t))
}

/// Random real diagonal density operator.
pub fn random_diagonal_density(rng: &mut impl Rng, dim: usize) -> DensityOperator {
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    DensityOperator::from_operator_unchecked(HermitianOperator::diagonal(&w.iter().map(|x| x / t).collect::<Vec<_>>()))
}

/// Haar-random unitary via QR of a Ginibre matrix (Gram–Schmidt with phase fix).
pub fn haar_unitary(rng: &mut impl Rng, dim: usize) -> Mat<c64> {
    let g = ginibre(rng, dim, dim);
    let mut q = Mat::<c64>::zeros(dim, dim);
    for j in 0..dim {
        let mut v: Vec<c64> = (0..dim).map(|i| g[(i, j)]).collect();
        for k in 0..j {
            let mut proj = c64::new(0.0, 0.0);
            for i in 0..dim {
                proj += q[(i, k)].conj() * v[i];
            }
            for i in 0..dim {
                v[i] -= q[(i, k)] * proj;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            q[(i, j)] = v[i] / norm;
        }
    }
    q
}

/// Random projective test: projection onto `rank` Haar-random orthonormal vectors.
pub fn random_projective_test(rng: &mut impl Rng, dim: usize, rank: usize) -> HermitianOperator {
    let u = haar_unitary(rng, dim);
    let cols = u.as_ref().subcols(0, rank.min(dim));
    HermitianOperator::symmetrized(cols * cols.adjoint())
}

/// Random POVM element `0 ≤ T ≤ I`: a Haar-rotated diagonal with uniform weights.
pub fn random_povm_element(rng: &mut impl Rng, dim: usize) -> HermitianOperator {
    let u = haar_unitary(rng, dim);
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let uw = Mat::from_fn(dim, dim, |i, j| u[(i, j)] * w[j]);
    HermitianOperator::symmetrized(&uw * u.adjoint())
}

/// Random probability vector with entries bounded away from zero.
pub fn random_distribution(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_stochastic(rng: &mut impl Rng, len: usize) -> Vec<Vec<f64>> {
    (0..len).map(|_| random_distribution(rng, len)).collect()
}
