//! Optimal tests between two states: the Bayesian optimum, the threshold
//! tests `{e^{−na}ρ_n − σ_n > 0}`, the combined error they minimize, and
//! finite-`n` exponent sweeps against the asymptotic predictions.

use faer::{Mat, MatRef};
use serde::Serialize;

use crate::classical::{nussbaum_szkola, product_error_exact};
use crate::error::{Error, Result};
use crate::exponents::{legendre_phi, psi_limit, unit_grid, PsiProfile, DEFAULT_GRID_POINTS};
use crate::numeric::{log_add_exp, CompensatedSum};
use crate::operator::{self, spectral_decompose, HermitianOperator, Projection, DEFAULT_SIZE_CAP};
use crate::state::{restrict_capped, DensityOperator, StateFamily};

/// Eigenvalues of the test operator within `1e-12 (1 + ‖H‖)` of zero are excluded from the test.
const SIGN_ZERO_TOL: f64 = 1e-12;

fn check_prior(pi: f64) -> Result<()> {
    if pi > 0.0 && pi < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPrior(pi))
    }
}

fn check_dims(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.dim() == sigma.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: rho.dim(), right: sigma.dim() })
    }
}

/// The Bayes-optimal projective test and its error.
#[derive(Clone, Debug)]
pub struct BayesOutcome {
    /// `{πρ − (1−π)σ > 0}`: accept `ρ` on its range.
    pub test: Projection,
    /// `π Tr ρ(I−T) + (1−π) Tr σT` at the optimum, via the trace-norm formula.
    pub min_error: f64,
}

/// Minimize `π α(T) + (1−π) β(T)` over all tests `0 ≤ T ≤ I`.
///
/// ```
/// use quantum_exponents::discrimination::bayes_optimal_test;
/// use quantum_exponents::state::DensityOperator;
///
/// let rho = DensityOperator::basis(2, 0);
/// let sigma = DensityOperator::basis(2, 1);
/// let out = bayes_optimal_test(&rho, &sigma, 0.5).unwrap();
/// assert!(out.min_error.abs() < 1e-12);
/// ```
pub fn bayes_optimal_test(rho: &DensityOperator, sigma: &DensityOperator, pi: f64) -> Result<BayesOutcome> {
    check_prior(pi)?;
    check_dims(rho, sigma)?;
    let a = rho.operator().scaled(pi);
    let b = sigma.operator().scaled(1.0 - pi);
    let test = operator::positive_spectral_projection(&a.sub(&b)?)?;
    let min_error = operator::min_trace_overlap(&a, &b)?.max(0.0);
    Ok(BayesOutcome { test, min_error })
}

/// `π Tr ρ(I−T) + (1−π) Tr σT` for an arbitrary test `0 ≤ T ≤ I`.
pub fn bayes_error_of(rho: &DensityOperator, sigma: &DensityOperator, pi: f64, test: &HermitianOperator) -> Result<f64> {
    check_prior(pi)?;
    let accept = rho.operator().trace_product(test)?;
    let type2 = sigma.operator().trace_product(test)?;
    Ok(pi * (1.0 - accept) + (1.0 - pi) * type2)
}

/// Error probabilities of the threshold test `S_{n,a}`.
#[derive(Clone, Debug)]
pub struct TestOutcome {
    pub n: usize,
    pub a: f64,
    pub test: Projection,
    /// `Tr ρ_n (I − S)`.
    pub alpha: f64,
    /// `Tr σ_n S`.
    pub beta: f64,
    pub log_alpha: f64,
    pub log_beta: f64,
    pub log_alpha_over_n: f64,
    pub log_beta_over_n: f64,
    /// `e^{−na}` is invisible next to the other coefficient; the test reduces to a support test.
    pub underflow: bool,
    /// Eigenvalues within the zero band, excluded from the test.
    pub boundary_eigenvalues: usize,
}

/// `S_{n,a} = {e^{−na}ρ_n − σ_n > 0}` and its error probabilities.
///
/// The operator is rescaled so the larger coefficient is 1, which leaves the
/// positive part unchanged. Errors are accumulated from the eigenvectors of
/// the test operator, so small probabilities keep their relative accuracy.
pub fn threshold_test(rho_n: &DensityOperator, sigma_n: &DensityOperator, a: f64, n: usize) -> Result<TestOutcome> {
    check_dims(rho_n, sigma_n)?;
    if n == 0 {
        return Err(Error::InvalidArgument("number of sites must be at least 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold a = {a} must be finite")));
    }
    let x = -(n as f64) * a;
    let (cr, cs) = if x <= 0.0 { (x.exp(), 1.0) } else { (1.0, (-x).exp()) };
    let (nr, ns) = (rho_n.operator().max_abs_entry(), sigma_n.operator().max_abs_entry());
    let underflow = if x <= 0.0 { cr * nr < f64::EPSILON * ns } else { cs * ns < f64::EPSILON * nr };
    let h = rho_n.operator().linear_combination(cr, sigma_n.operator(), -cs)?;
    let dec = spectral_decompose(&h, 0.0)?;
    let zero = SIGN_ZERO_TOL * (1.0 + dec.spectral_norm());

    // Eigenvalues ascend, so the test is spanned by the trailing columns.
    let v = dec.vectors();
    let dim = h.dim();
    let mut split = dim;
    let mut boundary = 0;
    for (level, &lambda) in dec.eigenvalues().iter().enumerate() {
        let cols = dec.group_range(level);
        if lambda.abs() <= zero {
            boundary += cols.len();
        }
        if lambda > zero && split == dim {
            split = cols.start;
        }
    }
    let (neg, pos) = (v.subcols(0, split), v.subcols(split, dim - split));
    // α = Σ_{λ ≤ 0} v*ρv and β = Σ_{λ > 0} v*σv, term by term
    let quad_sum = |m: &HermitianOperator, cols: MatRef<'_, faer::c64>| {
        let mut acc = CompensatedSum::new();
        if cols.ncols() > 0 {
            let mv: Mat<faer::c64> = m.matrix() * cols;
            for j in 0..cols.ncols() {
                let mut q = CompensatedSum::new();
                for i in 0..dim {
                    q.add((cols[(i, j)].conj() * mv[(i, j)]).re);
                }
                acc.add(q.value().max(0.0));
            }
        }
        acc
    };
    let alpha = quad_sum(rho_n.operator(), neg);
    let beta = quad_sum(sigma_n.operator(), pos);
    let test = Projection::from_orthonormal_columns(pos);
    let (alpha, beta) = (alpha.value().min(1.0), beta.value().min(1.0));
    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    let (log_alpha, log_beta) = (ln(alpha), ln(beta));
    Ok(TestOutcome {
        n,
        a,
        test,
        alpha,
        beta,
        log_alpha,
        log_beta,
        log_alpha_over_n: log_alpha / n as f64,
        log_beta_over_n: log_beta / n as f64,
        underflow,
        boundary_eigenvalues: boundary,
    })
}

/// `log e_n(a)` with `e_n(a) = e^{−na} α_n(S_{n,a}) + β_n(S_{n,a})`.
pub fn log_combined_error(rho_n: &DensityOperator, sigma_n: &DensityOperator, a: f64, n: usize) -> Result<f64> {
    let out = threshold_test(rho_n, sigma_n, a, n)?;
    Ok(log_add_exp(-(n as f64) * a + out.log_alpha, out.log_beta))
}

/// `e_n(a) = min_{0≤T≤I} e^{−na} Tr ρ_n(I−T) + Tr σ_n T`, attained by `S_{n,a}`.
///
/// ```
/// use quantum_exponents::discrimination::combined_error;
/// use quantum_exponents::state::DensityOperator;
///
/// let rho = DensityOperator::diagonal(&[0.6, 0.4]).unwrap();
/// assert!((combined_error(&rho, &rho, 0.0, 1).unwrap() - 1.0).abs() < 1e-12);
/// ```
pub fn combined_error(rho_n: &DensityOperator, sigma_n: &DensityOperator, a: f64, n: usize) -> Result<f64> {
    Ok(log_combined_error(rho_n, sigma_n, a, n)?.exp())
}

/// Both sides of `min Bayes error ≤ π^s (1−π)^{1−s} Tr ρ^s σ^{1−s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AudenaertCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn audenaert_bound(rho_n: &DensityOperator, sigma_n: &DensityOperator, pi: f64, s: f64) -> Result<AudenaertCheck> {
    check_prior(pi)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidExponent(s));
    }
    let lhs = bayes_optimal_test(rho_n, sigma_n, pi)?.min_error;
    let rhs = pi.powf(s) * (1.0 - pi).powf(1.0 - s) * operator::trace_power_product(rho_n.operator(), sigma_n.operator(), s)?;
    Ok(AudenaertCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// Finite-`n` slopes of the threshold test against their limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub a: f64,
    pub slope_alpha: f64,
    pub slope_beta: f64,
    /// `−(φ(a) − a)`.
    pub pred_alpha: f64,
    /// `−φ(a)`.
    pub pred_beta: f64,
    pub gap_alpha: f64,
    pub gap_beta: f64,
    /// Computed by the exact classical evaluator rather than dense matrices.
    pub exact_classical: bool,
}

/// Options for [`exponent_sweep_with`].
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub size_cap: usize,
    /// Use the exact product evaluator for commuting product pairs.
    pub classical_shortcut: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { size_cap: DEFAULT_SIZE_CAP, classical_shortcut: true }
    }
}

/// Sweep `n` at fixed `a`, with predictions from [`psi_limit`].
pub fn exponent_sweep(model_rho: &StateFamily, model_sigma: &StateFamily, a: f64, n_list: &[usize]) -> Result<Vec<SweepRow>> {
    let profile = psi_limit(model_rho, model_sigma, &unit_grid(DEFAULT_GRID_POINTS))?;
    exponent_sweep_with(model_rho, model_sigma, &profile, a, n_list, &SweepOptions::default())
}

/// [`exponent_sweep`] against a precomputed profile.
pub fn exponent_sweep_with(
    model_rho: &StateFamily,
    model_sigma: &StateFamily,
    profile: &PsiProfile,
    a: f64,
    n_list: &[usize],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold a = {a} must be finite")));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.first() == Some(&0) {
        return Err(Error::InvalidArgument("number of sites must be at least 1".into()));
    }
    let phi = legendre_phi(profile, a);
    let (pred_alpha, pred_beta) = (-(phi - a), -phi);
    let classical = if opts.classical_shortcut { commuting_product_distributions(model_rho, model_sigma)? } else { None };
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let (slope_alpha, slope_beta, exact_classical) = match &classical {
            Some((p, q)) => {
                let e = product_error_exact(p, q, a, n)?;
                (e.alpha_slope(n), e.beta_slope(n), true)
            }
            None => {
                let rho_n = restrict_capped(model_rho, n, opts.size_cap)?;
                let sigma_n = restrict_capped(model_sigma, n, opts.size_cap)?;
                let out = threshold_test(&rho_n, &sigma_n, a, n)?;
                (out.log_alpha_over_n, out.log_beta_over_n, false)
            }
        };
        rows.push(SweepRow {
            n,
            a,
            slope_alpha,
            slope_beta,
            pred_alpha,
            pred_beta,
            gap_alpha: gap(slope_alpha, pred_alpha),
            gap_beta: gap(slope_beta, pred_beta),
            exact_classical,
        });
    }
    Ok(rows)
}

fn gap(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        x - y
    }
}

/// For commuting product pairs, distributions in a shared eigenbasis.
fn commuting_product_distributions(rho: &StateFamily, sigma: &StateFamily) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (StateFamily::Iid(r1), StateFamily::Iid(s1)) = (rho, sigma) else {
        return Ok(None);
    };
    let rs = r1.operator().product(s1.operator())?;
    let sr = s1.operator().product(r1.operator())?;
    let d = r1.dim();
    let mut comm = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            comm = comm.max((rs[(i, j)] - sr[(i, j)]).norm());
        }
    }
    if comm > 1e-12 {
        return Ok(None);
    }
    Ok(Some(nussbaum_szkola(r1, s1)?.completed_distributions()))
}
