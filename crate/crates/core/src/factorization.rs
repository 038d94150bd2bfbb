//! Measured factorization constants and the `ψ`/`φ` bands they certify.
//!
//! A family `ω_n` factorizes with constant `η` when, for `n = km + r`,
//! `η^{−k} G ≤ ω_n ≤ η^k G` with `G = ω_m^{⊗k} ⊗ ω_r`. Constants are reported
//! per cut, i.e. as `c(n)^{1/k}` where `c(n)` is the measured operator ratio.

use serde::Serialize;

use crate::classical::nussbaum_szkola;
use crate::error::{Error, Result};
use crate::exponents::{legendre_phi, PsiProfile};
use crate::operator::{kron_capped, kron_power, psd_decompose, HermitianOperator, DEFAULT_SIZE_CAP};
use crate::state::{projection_le, restrict_capped, MarkovChain, StateFamily};

/// Largest ratio `λ_max(B^{−1/2} A B^{−1/2})` on `supp B`, or `None` when `supp A ⊄ supp B`.
pub fn max_relative_eigenvalue(a: &HermitianOperator, b: &HermitianOperator) -> Result<Option<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    if let (Some(da), Some(db)) = (a.diagonal_entries(), b.diagonal_entries()) {
        let ta = threshold(&da);
        let tb = threshold(&db);
        let mut best = 0.0f64;
        for (x, y) in da.iter().zip(&db) {
            match (*x > ta, *y > tb) {
                (true, false) => return Ok(None),
                (true, true) => best = best.max(x / y),
                _ => {}
            }
        }
        return Ok(Some(best));
    }
    let da = psd_decompose(a)?;
    let db = psd_decompose(b)?;
    if !projection_le(&da.support_projection(), &db.support_projection())? {
        return Ok(None);
    }
    let inv_sqrt = db.power(-0.5);
    let m = a.congruence(inv_sqrt.matrix());
    Ok(Some(m.eigenvalues()?.last().copied().unwrap_or(0.0)))
}

fn threshold(v: &[f64]) -> f64 {
    v.len() as f64 * 1e-12 * v.iter().fold(0.0f64, |m, x| m.max(*x))
}

/// Measured constants at one `n = km + r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorizationSample {
    pub n: usize,
    pub k: usize,
    /// `λ_max(G^{−1/2} ω_n G^{−1/2})`; `+inf` when `supp ω_n ⊄ supp G`.
    pub upper_ratio: f64,
    /// `λ_max(ω_n^{−1/2} G ω_n^{−1/2})`; `+inf` when `supp G ⊄ supp ω_n`.
    pub lower_ratio: f64,
}

/// Factorization constants measured up to `checked_n_max`.
///
/// These are lower bounds on the true global constants: only finitely many
/// `n` are inspected.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationEstimate {
    pub m: usize,
    pub eta_upper: f64,
    pub eta_lower: f64,
    pub checked_n_max: usize,
    /// Both directions satisfiable and `n = 2m` was checked.
    pub certified: bool,
    pub upper_unsatisfiable: bool,
    pub lower_unsatisfiable: bool,
    pub samples: Vec<FactorizationSample>,
}

impl FactorizationEstimate {
    /// The larger of the two constants, usable for a symmetric band.
    pub fn eta(&self) -> f64 {
        self.eta_upper.max(self.eta_lower)
    }
}

/// Measure per-cut factorization constants of `model` for block size `m` and all `m < n ≤ n_max`.
pub fn factorization_constants(model: &StateFamily, m: usize, n_max: usize) -> Result<FactorizationEstimate> {
    factorization_constants_capped(model, m, n_max, DEFAULT_SIZE_CAP)
}

/// [`factorization_constants`] with an explicit dimension cap.
pub fn factorization_constants_capped(model: &StateFamily, m: usize, n_max: usize, cap: usize) -> Result<FactorizationEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("block size must be at least 1".into()));
    }
    let d = model.site_dim();
    if d.checked_pow(n_max as u32).is_none_or(|v| v > cap) {
        return Err(Error::SizeOverflow { requested: d.saturating_pow(n_max as u32), cap });
    }
    let omega_m = if n_max > m { Some(restrict_capped(model, m, cap)?) } else { None };
    let mut est = FactorizationEstimate {
        m,
        eta_upper: 1.0,
        eta_lower: 1.0,
        checked_n_max: n_max,
        certified: false,
        upper_unsatisfiable: false,
        lower_unsatisfiable: false,
        samples: Vec::new(),
    };
    for n in (m + 1)..=n_max {
        let omega_m = omega_m.as_ref().expect("n > m");
        let k = (n - 1) / m;
        let r = n - k * m;
        let omega_n = restrict_capped(model, n, cap)?;
        let omega_r = restrict_capped(model, r, cap)?;
        let g = kron_capped(&kron_power(omega_m.operator(), k, cap)?, omega_r.operator(), cap)?;
        let up = max_relative_eigenvalue(omega_n.operator(), &g)?;
        let low = max_relative_eigenvalue(&g, omega_n.operator())?;
        let per_cut = |c: Option<f64>| c.map_or(f64::INFINITY, |c| c.max(1.0).powf(1.0 / k as f64));
        est.upper_unsatisfiable |= up.is_none();
        est.lower_unsatisfiable |= low.is_none();
        est.eta_upper = est.eta_upper.max(per_cut(up));
        est.eta_lower = est.eta_lower.max(per_cut(low));
        est.samples.push(FactorizationSample {
            n,
            k,
            upper_ratio: up.unwrap_or(f64::INFINITY),
            lower_ratio: low.unwrap_or(f64::INFINITY),
        });
    }
    est.certified = !est.upper_unsatisfiable && !est.lower_unsatisfiable && n_max >= 2 * m;
    Ok(est)
}

/// Exact per-cut constants of a classical chain: `max T_xy / r_y` above and
/// `max r_y / T_xy` below (`+inf` if some `T_xy = 0`).
pub fn markov_factorization_constants(chain: &MarkovChain) -> (f64, f64) {
    let r = chain.stationary();
    let mut upper = 1.0f64;
    let mut lower = 1.0f64;
    for row in chain.transition() {
        for (y, &t) in row.iter().enumerate() {
            if r[y] > 0.0 {
                upper = upper.max(t / r[y]);
                lower = if t > 0.0 { lower.max(r[y] / t) } else { f64::INFINITY };
            }
        }
    }
    (upper, lower)
}

/// `ψ_m` with the band `± (1/m) log η`.
pub fn psi_sandwich(model_rho: &StateFamily, model_sigma: &StateFamily, m: usize, eta: f64, grid: &[f64]) -> Result<PsiProfile> {
    if !(eta >= 1.0) {
        return Err(Error::InvalidArgument(format!("factorization constant {eta} must be at least 1")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("block size must be at least 1".into()));
    }
    let rho_m = restrict_capped(model_rho, m, DEFAULT_SIZE_CAP)?;
    let sigma_m = restrict_capped(model_sigma, m, DEFAULT_SIZE_CAP)?;
    let pair = nussbaum_szkola(&rho_m, &sigma_m)?;
    if pair.is_empty() {
        return Err(Error::OrthogonalSupports);
    }
    let warnings = if eta.is_finite() { Vec::new() } else { vec!["lower or upper factorization fails; the band is unbounded".to_string()] };
    PsiProfile::sandwich(pair, m, eta, grid, warnings)
}

/// `(φ_m(a) − w, φ_m(a) + w)`: a band for the limiting `φ` from a sandwich profile.
pub fn phi_sandwich(profile: &PsiProfile, a: f64) -> (f64, f64) {
    let v = legendre_phi(profile, a);
    let w = profile.sandwich_width();
    (v - w, v + w)
}
