//! The function `ψ(s)`, its polar transforms, and the Chernoff, Hoeffding and
//! Stein exponents derived from them.
//!
//! A [`PsiProfile`] stores `ψ` on a grid together with an evaluator that can
//! be queried off-grid, so maximizations are refined beyond the grid spacing.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::classical::{nussbaum_szkola, nussbaum_szkola_spectral, ClassicalPair};
use crate::error::{Error, Result};
use crate::factorization::{factorization_constants, psi_sandwich};
use crate::numeric::{self, golden_section_max, Maximum};
use crate::operator::{self, psd_decompose, Projection, DEFAULT_SIZE_CAP};
use crate::state::{
    self, markov_support_conditions, minimal_block_projections, support_relation, Condition, DensityOperator,
    QuantumHiddenMarkov, StateFamily,
};

/// Default number of uniform grid points on `[0, 1]`.
pub const DEFAULT_GRID_POINTS: usize = 513;

/// Tolerance in `s` for golden-section refinement of polar maxima.
const REFINE_TOL: f64 = 1e-11;

/// One-sided difference steps for Richardson extrapolation.
const RICHARDSON_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Derivative magnitudes above this are reported as infinite.
const DERIVATIVE_SENTINEL: f64 = 1e6;

/// Largest `d^{2m}` used when a sandwich block size is chosen automatically.
const AUTO_SANDWICH_BUDGET: usize = 256;

/// `points` equispaced values covering `[0, 1]` with exact endpoints.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|k| if k + 1 == points { 1.0 } else { k as f64 / (points - 1) as f64 }).collect()
}

/// How a profile's values were obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiMethod {
    /// Product states: `ψ = log Tr ρ₁^s σ₁^{1−s}` exactly.
    ExactIid,
    /// Hidden-Markov pair: `ψ = log r(Q(s))`.
    TransferMatrix,
    /// `ψ_m` with certified half-width `(1/m) log η`.
    FiniteNSandwich { m: usize, eta: f64 },
    /// `ψ_n` itself, without any claim about the limit.
    FiniteN { n: usize },
    /// A caller-supplied function.
    Custom,
}

#[derive(Clone)]
enum Evaluator {
    Pair { pair: Arc<ClassicalPair>, scale: f64 },
    Transfer(Arc<TransferPair>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Evaluator {
    fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Pair { pair, scale } => scale * pair.log_moment(s),
            Self::Transfer(t) => t.log_radius(s),
            Self::Function(f) => f(s),
        }
    }
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pair { pair, scale } => write!(f, "Pair({} atoms, scale {scale})", pair.len()),
            Self::Transfer(t) => write!(f, "Transfer({} letters)", t.alphabet_len()),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

/// `ψ` on a grid of `[0, 1]`, its boundary derivatives and its provenance.
#[derive(Clone, Debug)]
pub struct PsiProfile {
    method: PsiMethod,
    grid: Vec<f64>,
    values: Vec<f64>,
    d_right_0: f64,
    d_left_1: f64,
    sandwich_width: f64,
    warnings: Vec<String>,
    evaluator: Evaluator,
}

impl PsiProfile {
    fn build(method: PsiMethod, evaluator: Evaluator, grid: &[f64], sandwich_width: f64, warnings: Vec<String>) -> Result<Self> {
        validate_grid(grid)?;
        let values: Vec<f64> = grid.iter().map(|&s| evaluator.eval(s)).collect();
        if values.contains(&f64::NEG_INFINITY) {
            return Err(Error::OrthogonalSupports);
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("ψ({}) is not finite", grid[k])));
        }
        let (d_right_0, d_left_1) = richardson_boundary(|s| evaluator.eval(s));
        Ok(Self { method, grid: grid.to_vec(), values, d_right_0, d_left_1, sandwich_width, warnings, evaluator })
    }

    /// Profile of an arbitrary convex function on `[0, 1]`.
    pub fn from_function(f: impl Fn(f64) -> f64 + Send + Sync + 'static, grid: &[f64]) -> Result<Self> {
        Self::build(PsiMethod::Custom, Evaluator::Function(Arc::new(f)), grid, 0.0, Vec::new())
    }

    /// `ψ_n = (1/n) log Σ p^s q^{1−s}` for a pair built from `n`-site densities.
    pub fn from_pair(pair: ClassicalPair, n: usize, grid: &[f64]) -> Result<Self> {
        Self::build(PsiMethod::FiniteN { n }, Evaluator::Pair { pair: Arc::new(pair), scale: 1.0 / n as f64 }, grid, 0.0, Vec::new())
    }

    /// `ψ_n` of two `n`-site densities.
    pub fn finite_n(rho_n: &DensityOperator, sigma_n: &DensityOperator, n: usize, grid: &[f64]) -> Result<Self> {
        Self::from_pair(nussbaum_szkola(rho_n, sigma_n)?, n, grid)
    }

    pub(crate) fn sandwich(pair: ClassicalPair, m: usize, eta: f64, grid: &[f64], warnings: Vec<String>) -> Result<Self> {
        let width = eta.ln().max(0.0) / m as f64;
        Self::build(
            PsiMethod::FiniteNSandwich { m, eta },
            Evaluator::Pair { pair: Arc::new(pair), scale: 1.0 / m as f64 },
            grid,
            width,
            warnings,
        )
    }

    pub fn method(&self) -> &PsiMethod {
        &self.method
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ψ′₊(0)`.
    pub fn d_right_0(&self) -> f64 {
        self.d_right_0
    }

    /// `ψ′₋(1)`.
    pub fn d_left_1(&self) -> f64 {
        self.d_left_1
    }

    /// The interval `(ψ′₊(0), ψ′₋(1))` on which the threshold tests have nontrivial exponents.
    pub fn interval(&self) -> (f64, f64) {
        (self.d_right_0, self.d_left_1)
    }

    /// Certified half-width of the band around the values; zero for exact methods.
    pub fn sandwich_width(&self) -> f64 {
        self.sandwich_width
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Evaluate `ψ(s)` off-grid.
    pub fn psi(&self, s: f64) -> f64 {
        self.evaluator.eval(s)
    }

    pub fn psi_at_0(&self) -> f64 {
        self.values[0]
    }

    pub fn psi_at_1(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Evaluate outside `[0, 1]`; the flag marks values the block-factorization
    /// argument does not cover.
    pub fn psi_extended(&self, s: f64) -> ExtendedValue {
        ExtendedValue { s, value: self.evaluator.eval(s), beyond_factorization_guarantee: !(0.0..=1.0).contains(&s) }
    }

    /// Second differences on the grid are all `≥ -tol`.
    pub fn is_discretely_convex(&self, tol: f64) -> bool {
        self.grid.windows(3).zip(self.values.windows(3)).all(|(s, v)| {
            let (h1, h2) = (s[1] - s[0], s[2] - s[1]);
            // divided second difference scaled to the local spacing
            let slope_change = (v[2] - v[1]) / h2 - (v[1] - v[0]) / h1;
            slope_change * 0.5 * (h1 + h2) >= -tol
        })
    }

    fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }
}

/// A value of `ψ` queried anywhere on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtendedValue {
    pub s: f64,
    pub value: f64,
    pub beyond_factorization_guarantee: bool,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument("grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("grid must be strictly ascending".into()));
    }
    Ok(())
}

fn sentinel(x: f64) -> f64 {
    if x > DERIVATIVE_SENTINEL {
        f64::INFINITY
    } else if x < -DERIVATIVE_SENTINEL {
        f64::NEG_INFINITY
    } else {
        x
    }
}

fn richardson(d: impl Fn(f64) -> f64) -> f64 {
    let [h1, h2, h3] = RICHARDSON_STEPS;
    let (d1, d2, d3) = (d(h1), d(h2), d(h3));
    let r1 = 2.0 * d2 - d1;
    let r2 = 2.0 * d3 - d2;
    sentinel((4.0 * r2 - r1) / 3.0)
}

fn richardson_boundary(psi: impl Fn(f64) -> f64) -> (f64, f64) {
    let (p0, p1) = (psi(0.0), psi(1.0));
    let right0 = richardson(|h| (psi(h) - p0) / h);
    let left1 = richardson(|h| (p1 - psi(1.0 - h)) / h);
    // convexity gives right0 ≤ left1; an inversion is rounding on a (near-)affine ψ
    if right0 > left1 {
        let mid = 0.5 * (right0 + left1);
        return (mid, mid);
    }
    (right0, left1)
}

/// `(ψ′₊(0), ψ′₋(1))` by Richardson-extrapolated one-sided differences.
pub fn psi_boundary_derivatives(profile: &PsiProfile) -> (f64, f64) {
    richardson_boundary(|s| profile.psi(s))
}

/// Boundary derivatives of `ψ_n` for an `n`-site pair.
pub fn finite_n_boundary_derivatives(rho_n: &DensityOperator, sigma_n: &DensityOperator, n: usize) -> Result<(f64, f64)> {
    let pair = nussbaum_szkola(rho_n, sigma_n)?;
    if pair.is_empty() {
        return Err(Error::OrthogonalSupports);
    }
    let scale = 1.0 / n as f64;
    Ok(richardson_boundary(|s| scale * pair.log_moment(s)))
}

/// `ψ_n(s) = (1/n) log Tr ρ_n^s σ_n^{1−s}`, through explicit matrix powers;
/// `-inf` when the trace vanishes.
pub fn psi_n(rho_n: &DensityOperator, sigma_n: &DensityOperator, n: usize, s: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of sites must be at least 1".into()));
    }
    let t = operator::trace_power_product(rho_n.operator(), sigma_n.operator(), s)?;
    Ok(if t > 0.0 { t.ln() / n as f64 } else { f64::NEG_INFINITY })
}

/// Options for [`psi_limit_with`].
#[derive(Clone, Debug)]
pub struct PsiOptions {
    pub grid: Vec<f64>,
    /// Block size for the sandwich fallback; chosen from the one-site dimension when absent.
    pub sandwich_block: Option<usize>,
    pub size_cap: usize,
}

impl Default for PsiOptions {
    fn default() -> Self {
        Self { grid: unit_grid(DEFAULT_GRID_POINTS), sandwich_block: None, size_cap: DEFAULT_SIZE_CAP }
    }
}

/// The limit `ψ(s) = lim ψ_n(s)` by the best available method.
pub fn psi_limit(model_rho: &StateFamily, model_sigma: &StateFamily, grid: &[f64]) -> Result<PsiProfile> {
    psi_limit_with(model_rho, model_sigma, &PsiOptions { grid: grid.to_vec(), ..PsiOptions::default() })
}

/// [`psi_limit`] with explicit options.
///
/// Product pairs are exact. Hidden-Markov pairs use the transfer matrix when
/// the block support condition holds and `Q(s)` is irreducible; everything
/// else falls back to a finite-block sandwich with a measured factorization constant.
pub fn psi_limit_with(model_rho: &StateFamily, model_sigma: &StateFamily, opts: &PsiOptions) -> Result<PsiProfile> {
    if model_rho.site_dim() != model_sigma.site_dim() {
        return Err(Error::DimensionMismatch { left: model_rho.site_dim(), right: model_sigma.site_dim() });
    }
    let mut warnings = Vec::new();
    if let (StateFamily::Iid(r1), StateFamily::Iid(s1)) = (model_rho, model_sigma) {
        let pair = nussbaum_szkola(r1, s1)?;
        let profile = PsiProfile::build(PsiMethod::ExactIid, Evaluator::Pair { pair: Arc::new(pair), scale: 1.0 }, &opts.grid, 0.0, Vec::new())?;
        return cross_check_relative_entropy(profile, r1, s1);
    }
    if let (Some(hr), Some(hs)) = (model_rho.as_hidden_markov(), model_sigma.as_hidden_markov()) {
        if hr.alphabet_len() == hs.alphabet_len() {
            let tp = TransferPair::new(&hr, &hs)?;
            match (tp.block_condition(), tp.irreducible()) {
                (Condition::Holds, true) => {
                    return PsiProfile::build(PsiMethod::TransferMatrix, Evaluator::Transfer(Arc::new(tp)), &opts.grid, 0.0, Vec::new());
                }
                (Condition::Holds, false) => warnings.push("transfer matrix is reducible; using the finite-block sandwich".to_string()),
                _ => warnings.push("no orthogonal block family separates the site supports; using the finite-block sandwich".to_string()),
            }
        }
    }
    let d = model_rho.site_dim();
    let m = match opts.sandwich_block {
        Some(m) => m.max(1),
        None => {
            let mut m = 1;
            while d.checked_pow(2 * (m as u32 + 1)).is_some_and(|v| v <= AUTO_SANDWICH_BUDGET.min(opts.size_cap)) {
                m += 1;
            }
            let limit = [model_rho.max_sites(), model_sigma.max_sites()].into_iter().flatten().min();
            match limit {
                Some(l) => m.min((l / 2).max(1)),
                None => m,
            }
        }
    };
    let n_max = {
        let wanted = 2 * m;
        let limit = [model_rho.max_sites(), model_sigma.max_sites()].into_iter().flatten().min().unwrap_or(wanted);
        wanted.min(limit)
    };
    let fr = factorization_constants(model_rho, m, n_max)?;
    let fs = factorization_constants(model_sigma, m, n_max)?;
    let eta = [fr.eta_upper, fr.eta_lower, fs.eta_upper, fs.eta_lower].into_iter().fold(1.0f64, f64::max);
    if !(fr.certified && fs.certified) {
        warnings.push(format!("factorization not certified up to n = {n_max}; the band is not a guarantee"));
    }
    let profile = psi_sandwich(model_rho, model_sigma, m, eta, &opts.grid)?;
    Ok(warnings.into_iter().fold(profile, PsiProfile::with_warning))
}

/// `log r(Q(s))` for a hidden-Markov pair, whether or not it is known to be the limit.
///
/// Without the block condition the value is still the analytic Perron root,
/// which is what its derivative identities are about; a warning records that
/// the pairing identity is not guaranteed.
pub fn psi_transfer_profile(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov, grid: &[f64]) -> Result<PsiProfile> {
    let tp = TransferPair::new(rho, sigma)?;
    let mut warnings = Vec::new();
    if tp.block_condition() != Condition::Holds {
        warnings.push("no orthogonal block family separates the site supports; log r(s) may differ from the limit".to_string());
    }
    if !tp.irreducible() {
        warnings.push("transfer matrix is reducible".to_string());
    }
    PsiProfile::build(PsiMethod::TransferMatrix, Evaluator::Transfer(Arc::new(tp)), grid, 0.0, warnings)
}

fn cross_check_relative_entropy(profile: PsiProfile, r1: &DensityOperator, s1: &DensityOperator) -> Result<PsiProfile> {
    if support_relation(r1, s1)?.left_in_right() {
        let rel = relative_entropy(r1, s1)?;
        if (profile.d_left_1() - rel).abs() > 1e-6 * (1.0 + rel) {
            let msg = format!("ψ′₋(1) = {} differs from S(ρ₁‖σ₁) = {rel}", profile.d_left_1());
            return Ok(profile.with_warning(msg));
        }
    }
    Ok(profile)
}

/// Precomputed site data for evaluating the transfer matrix at many `s`.
#[derive(Clone, Debug)]
pub struct TransferPair {
    t: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    r: Vec<f64>,
    p: Vec<f64>,
    site_pairs: Vec<Vec<Option<ClassicalPair>>>,
    boundary_pairs: Vec<ClassicalPair>,
    irreducible: bool,
    block_condition: Condition,
    blocks: Option<Vec<Projection>>,
}

impl TransferPair {
    pub fn new(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov) -> Result<Self> {
        if rho.alphabet_len() != sigma.alphabet_len() {
            return Err(Error::DimensionMismatch { left: rho.alphabet_len(), right: sigma.alphabet_len() });
        }
        if rho.site_dim() != sigma.site_dim() {
            return Err(Error::DimensionMismatch { left: rho.site_dim(), right: sigma.site_dim() });
        }
        let k = rho.alphabet_len();
        let mut site_pairs = Vec::with_capacity(k);
        for x in 0..k {
            let mut row = Vec::with_capacity(k);
            for y in 0..k {
                row.push(match (rho.site_state(x, y), sigma.site_state(x, y)) {
                    (Some(a), Some(b)) if rho.chain().t(x, y) > 0.0 && sigma.chain().t(x, y) > 0.0 => Some(nussbaum_szkola(a, b)?),
                    _ => None,
                });
            }
            site_pairs.push(row);
        }
        let boundary_pairs = (0..k)
            .map(|x| nussbaum_szkola(&rho.boundary_state(x), &sigma.boundary_state(x)))
            .collect::<Result<Vec<_>>>()?;
        let blocks = minimal_block_projections(rho, sigma)?;
        let block_condition = match &blocks {
            None => Condition::Fails,
            Some(b) => markov_support_conditions(rho, sigma, Some(b))?.cond1,
        };
        let mut tp = Self {
            t: rho.chain().transition().to_vec(),
            s: sigma.chain().transition().to_vec(),
            r: rho.chain().stationary().to_vec(),
            p: sigma.chain().stationary().to_vec(),
            site_pairs,
            boundary_pairs,
            irreducible: false,
            block_condition,
            blocks,
        };
        tp.irreducible = strongly_connected(&tp.matrix(0.5));
        Ok(tp)
    }

    pub fn alphabet_len(&self) -> usize {
        self.t.len()
    }

    /// Whether the site supports admit orthogonal blocks, which makes the
    /// pairing identity exact.
    pub fn block_condition(&self) -> Condition {
        self.block_condition
    }

    /// The minimal block projections, when they are mutually orthogonal.
    pub fn blocks(&self) -> Option<&[Projection]> {
        self.blocks.as_deref()
    }

    /// Strong connectivity of the support graph of `Q(s)` for `s ∈ (0, 1)`.
    pub fn irreducible(&self) -> bool {
        self.irreducible
    }

    fn matrix(&self, s: f64) -> Vec<Vec<f64>> {
        let k = self.alphabet_len();
        (0..k)
            .map(|x| {
                (0..k)
                    .map(|y| match &self.site_pairs[x][y] {
                        Some(pair) => scalar_power_product(self.t[x][y], self.s[x][y], s) * pair.moment(s),
                        None => 0.0,
                    })
                    .collect()
            })
            .collect()
    }

    /// `Q(s)`, the boundary vectors and the spectral radius.
    pub fn at(&self, s: f64) -> TransferMatrix {
        let q = self.matrix(s);
        let a = self.r.iter().zip(&self.p).map(|(&r, &p)| scalar_power_product(r, p, s)).collect();
        let b = self.boundary_pairs.iter().map(|pair| pair.moment(s)).collect();
        let spectral_radius = spectral_radius(&q);
        TransferMatrix { s, q, a, b, spectral_radius, irreducible: self.irreducible }
    }

    /// `log r(Q(s))`.
    pub fn log_radius(&self, s: f64) -> f64 {
        let r = spectral_radius(&self.matrix(s));
        if r > 0.0 {
            r.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `x^s y^{1−s}` with `0^s := 0`.
fn scalar_power_product(x: f64, y: f64, s: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        0.0
    } else {
        (s * x.ln() + (1.0 - s) * y.ln()).exp()
    }
}

/// `Q(s)` with boundary vectors `a(s)`, `b(s)` and its Perron root.
#[derive(Clone, Debug, Serialize)]
pub struct TransferMatrix {
    pub s: f64,
    pub q: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub spectral_radius: f64,
    pub irreducible: bool,
}

impl TransferMatrix {
    /// `⟨a, Q^{n−1} b⟩`, which equals `Tr ρ_n^s σ_n^{1−s}` under the block condition.
    pub fn pairing(&self, n: usize) -> f64 {
        let mut v = self.b.clone();
        for _ in 1..n {
            v = mat_vec(&self.q, &v);
        }
        numeric::sum(self.a.iter().zip(&v).map(|(a, v)| a * v))
    }
}

/// The transfer matrix of two hidden-Markov models at `s`.
pub fn transfer_matrix_q(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov, s: f64) -> Result<TransferMatrix> {
    Ok(TransferPair::new(rho, sigma)?.at(s))
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| numeric::sum(row.iter().zip(v).map(|(a, b)| a * b))).collect()
}

fn strongly_connected(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let edge = if forward { m[x][y] } else { m[y][x] };
                if edge > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|b| b)
    };
    n > 0 && reach(true) && reach(false)
}

/// Perron root of a nonnegative matrix.
///
/// Power iteration on `Q + I` from the all-ones vector, stopped when the
/// Collatz–Wielandt bracket closes to `1e-13` relative; falls back to a dense
/// eigenvalue solve when the iterate loses positivity or stalls.
pub fn spectral_radius(q: &[Vec<f64>]) -> f64 {
    let n = q.len();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0; n];
    for _ in 0..200_000 {
        let mut w = mat_vec(q, &v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += vi;
        }
        if v.iter().any(|&x| !(x > 0.0)) {
            break;
        }
        let (lo, hi) = w.iter().zip(&v).fold((f64::INFINITY, 0.0f64), |(lo, hi), (w, v)| (lo.min(w / v), hi.max(w / v)));
        if hi - lo <= 1e-13 * hi {
            return (0.5 * (lo + hi) - 1.0).max(0.0);
        }
        let norm = w.iter().fold(0.0f64, |m, x| m.max(*x));
        if !(norm > 0.0) {
            break;
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| q[i][j]);
    match m.eigenvalues() {
        Ok(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

fn polar_max(profile: &PsiProfile, a: f64) -> Maximum {
    let grid = profile.grid();
    let vals = profile.values();
    let mut best = 0;
    for k in 1..grid.len() {
        if a * grid[k] - vals[k] > a * grid[best] - vals[best] {
            best = k;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section_max(|s| a * s - profile.psi(s), lo, hi, REFINE_TOL);
    let node = Maximum { arg: grid[best], value: a * grid[best] - vals[best] };
    if refined.value >= node.value {
        refined
    } else {
        node
    }
}

/// `φ(a) = max_{s∈[0,1]} {as − ψ(s)}`; for sandwich profiles this is the band midpoint.
///
/// ```
/// use quantum_exponents::exponents::{legendre_phi, unit_grid, PsiProfile};
///
/// let profile = PsiProfile::from_function(|_| -(2f64.ln()), &unit_grid(513)).unwrap();
/// assert!((legendre_phi(&profile, 0.5) - (2f64.ln() + 0.5)).abs() < 1e-12);
/// assert!((legendre_phi(&profile, -0.5) - 2f64.ln()).abs() < 1e-12);
/// ```
pub fn legendre_phi(profile: &PsiProfile, a: f64) -> f64 {
    polar_max(profile, a).value
}

/// The maximizing `s` of [`legendre_phi`].
pub fn legendre_argmax(profile: &PsiProfile, a: f64) -> f64 {
    polar_max(profile, a).arg
}

/// `(φ_m(a) − w, φ_m(a) + w)` with `w` the profile's sandwich width.
pub fn phi_band(profile: &PsiProfile, a: f64) -> (f64, f64) {
    let v = legendre_phi(profile, a);
    (v - profile.sandwich_width(), v + profile.sandwich_width())
}

/// `φ̂(a) = φ(a) − a`.
pub fn hat_phi(profile: &PsiProfile, a: f64) -> f64 {
    legendre_phi(profile, a) - a
}

/// Chernoff exponent `C = −min_{s∈[0,1]} ψ(s) = φ(0)`.
pub fn chernoff_exponent(profile: &PsiProfile) -> f64 {
    legendre_phi(profile, 0.0)
}

/// Solution of the Hoeffding problem at rate `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoeffdingSolution {
    pub r: f64,
    /// Unique `a` with `φ̂(a) = r`; `+inf` when no finite solution exists.
    pub a_r: f64,
    /// Maximizer of `(−sr − ψ(s))/(1 − s)`; `1` when the supremum is the `s → 1` limit.
    pub s_r: f64,
    /// `max_{0≤s<1} (−sr − ψ(s))/(1 − s)`.
    pub b_r: f64,
    /// Optimal type II exponent `−b_r`, or `-inf` when `r < −ψ(1)`.
    pub exponent: f64,
}

/// Solve `φ̂(a_r) = r` by bisection and evaluate `b(r)` by direct maximization.
pub fn hoeffding_solve(profile: &PsiProfile, r: f64) -> HoeffdingSolution {
    let psi1 = profile.psi_at_1();
    let psi0 = profile.psi_at_0();
    let d1 = profile.d_left_1();
    if r < -psi1 {
        return HoeffdingSolution { r, a_r: f64::INFINITY, s_r: 1.0, b_r: f64::INFINITY, exponent: f64::NEG_INFINITY };
    }
    let at_edge = r <= -psi1 + 1e-14 * (1.0 + psi1.abs());
    let a_r = if d1 == f64::INFINITY && at_edge {
        f64::INFINITY
    } else {
        solve_hat_phi(profile, r, psi0, d1)
    };
    let (s_r, b_r) = hoeffding_fraction_max(profile, r, at_edge);
    HoeffdingSolution { r, a_r, s_r, b_r, exponent: -b_r }
}

fn solve_hat_phi(profile: &PsiProfile, r: f64, psi0: f64, d1: f64) -> f64 {
    let f = |a: f64| hat_phi(profile, a) - r;
    // φ̂(a) ≥ −ψ(0) − a, so the lower end has φ̂ ≥ r + 1.
    let lo = -r - psi0 - 1.0;
    let mut hi = if d1.is_finite() { d1.max(lo + 1e-12) } else { lo + 1.0 };
    let mut step = 1e-9 * (1.0 + hi.abs());
    let mut tries = 0;
    while f(hi) > 0.0 {
        hi += step;
        step *= 2.0;
        tries += 1;
        if tries > 200 {
            return f64::INFINITY;
        }
    }
    if f(hi) == 0.0 {
        return hi;
    }
    let mut lo = lo;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi || hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The smallest root: φ̂ is constant beyond ψ′₋(1).
    0.5 * (lo + hi)
}

fn hoeffding_fraction_max(profile: &PsiProfile, r: f64, at_edge: bool) -> (f64, f64) {
    let g = |s: f64, psi: f64| (-s * r - psi) / (1.0 - s);
    let grid = profile.grid();
    let vals = profile.values();
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| grid[k] < 1.0).collect();
    let mut best = interior[0];
    for &k in &interior {
        if g(grid[k], vals[k]) > g(grid[best], vals[best]) {
            best = k;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let last_interior = *interior.last().unwrap();
    // Stay away from s = 1 where the fraction loses all precision.
    let hi = if best < last_interior { grid[best + 1] } else { (grid[best] + 1.0) * 0.5 };
    let hi = hi.min(1.0 - 1e-4);
    let refined = golden_section_max(|s| g(s, profile.psi(s)), lo.min(hi), hi, REFINE_TOL);
    let node = Maximum { arg: grid[best], value: g(grid[best], vals[best]) };
    let mut out = if refined.value >= node.value { refined } else { node };
    if at_edge {
        let limit = profile.d_left_1() - profile.psi_at_1();
        if limit >= out.value {
            out = Maximum { arg: 1.0, value: limit };
        }
    }
    (out.arg, out.value)
}

/// Full-line Legendre transform value with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FullLineLegendre {
    pub x: f64,
    pub value: f64,
    pub arg: f64,
    /// The supremum sat on the truncation boundary and may be larger.
    pub truncated: bool,
    /// `x` is within `1e-9` of `ψ′(0)` or `ψ′(1)`, where the large-deviation
    /// identity needs continuity of the transform.
    pub boundary_caveat: bool,
}

/// `ψ*(x) = sup_{s∈[−S, 1+S]} {sx − ψ(s)}` for profiles analytic on the line.
pub fn legendre_full_line(profile: &PsiProfile, x: f64, s_max: f64) -> Result<FullLineLegendre> {
    match profile.method() {
        PsiMethod::ExactIid | PsiMethod::TransferMatrix | PsiMethod::FiniteN { .. } | PsiMethod::Custom => {}
        PsiMethod::FiniteNSandwich { .. } => {
            return Err(Error::InvalidArgument("the full-line transform needs an exact or transfer-matrix profile".into()));
        }
    }
    let lo = -s_max;
    let hi = 1.0 + s_max;
    let m = numeric::grid_refined_max(|s| s * x - profile.psi(s), lo, hi, 1025, REFINE_TOL);
    let span = hi - lo;
    let truncated = m.arg - lo <= 1e-6 * span || hi - m.arg <= 1e-6 * span;
    let (d0, d1) = profile.interval();
    let boundary_caveat = (x - d0).abs() <= 1e-9 || (x - d1).abs() <= 1e-9;
    Ok(FullLineLegendre { x, value: m.value, arg: m.arg, truncated, boundary_caveat })
}

/// Relative entropy `Tr ρ(log ρ − log σ)`, `+inf` unless `supp ρ ≤ supp σ`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if !support_relation(rho, sigma)?.left_in_right() {
        return Ok(f64::INFINITY);
    }
    let pair = nussbaum_szkola(rho, sigma)?;
    Ok(numeric::sum(pair.p().iter().zip(pair.q()).map(|(p, q)| p * (p.ln() - q.ln()))))
}

/// Mean relative entropy of two hidden-Markov models:
/// `Σ_x r_x S(T_x·‖S_x·) + Σ_{xy} r_x T_xy S(θ_xy‖φ_xy)`.
pub fn markov_mean_relative_entropy(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov) -> Result<f64> {
    let report = markov_support_conditions(rho, sigma, None)?;
    if !report.cond2 {
        return Err(Error::SupportViolation("a transition allowed under ρ is forbidden under σ".into()));
    }
    if !report.cond3 {
        return Err(Error::SupportViolation("a site state of ρ is not supported inside the matching site state of σ".into()));
    }
    let k = rho.alphabet_len();
    let r = rho.chain().stationary();
    let mut acc = numeric::CompensatedSum::new();
    for x in 0..k {
        for y in 0..k {
            let t = rho.chain().t(x, y);
            if t > 0.0 {
                let s = sigma.chain().t(x, y);
                acc.add(r[x] * t * (t.ln() - s.ln()));
                let theta = rho.site_state(x, y).expect("validated");
                let phi = sigma.site_state(x, y).expect("cond3 checked");
                acc.add(r[x] * t * relative_entropy(theta, phi)?);
            }
        }
    }
    Ok(acc.value())
}

/// Second derivative of `s ↦ log Tr ρ_n^s σ_n^{1−s}` (not normalized by `n`).
pub fn psi_second_derivative(rho_n: &DensityOperator, sigma_n: &DensityOperator, s: f64) -> Result<f64> {
    let pair = nussbaum_szkola(rho_n, sigma_n)?;
    if pair.is_empty() {
        return Err(Error::OrthogonalSupports);
    }
    Ok(pair.log_moment_second_derivative(s))
}

/// Whether `ψ` is affine, and if so the constant ratio and matched levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineReport {
    pub is_affine: bool,
    /// Common ratio `λ_i / η_j` over the support atoms.
    pub delta: Option<f64>,
    /// Matched spectral levels `(i_k, j_k)`.
    pub pairing: Option<Vec<(usize, usize)>>,
    /// Largest `ψ″` over eleven equispaced points of `[0, 1]`.
    pub max_second_derivative: f64,
    pub second_derivative_at_half: f64,
    /// Every atom satisfies `λ_i = δ η_j` within `1e-9` and each level is matched once.
    pub pairing_consistent: bool,
    /// The joins `P_i ∨ Q_j` of matched levels are mutually orthogonal.
    pub blocks_orthogonal: bool,
    /// Every matched `P_i ∧ Q_j` is nonzero (automatic for faithful states only).
    pub intersections_nonzero: bool,
}

/// Detect affine `ψ` via `ψ″(½) ≤ 1e-8` and recover the level structure.
pub fn affine_structure(rho_n: &DensityOperator, sigma_n: &DensityOperator) -> Result<AffineReport> {
    let pair = nussbaum_szkola_spectral(rho_n, sigma_n)?;
    if pair.is_empty() {
        return Err(Error::OrthogonalSupports);
    }
    let second_derivative_at_half = pair.log_moment_second_derivative(0.5);
    let max_second_derivative =
        (0..=10).map(|k| pair.log_moment_second_derivative(k as f64 / 10.0)).fold(0.0f64, f64::max);
    let is_affine = second_derivative_at_half <= 1e-8;
    if !is_affine {
        return Ok(AffineReport {
            is_affine,
            delta: None,
            pairing: None,
            max_second_derivative,
            second_derivative_at_half,
            pairing_consistent: false,
            blocks_orthogonal: false,
            intersections_nonzero: false,
        });
    }
    let ratios = pair.log_ratios();
    let weights = pair.tilted(0.5);
    let c = numeric::sum(ratios.iter().zip(&weights).map(|(f, w)| f * w));
    let delta = c.exp();
    let atoms = pair.atoms().to_vec();
    let lam = pair.rho_levels();
    let eta = pair.sigma_levels();
    let mut consistent = atoms.iter().all(|&(i, j)| (lam[i] - delta * eta[j]).abs() <= 1e-9 * lam[i].max(delta * eta[j]));
    let mut is: Vec<usize> = atoms.iter().map(|a| a.0).collect();
    let mut js: Vec<usize> = atoms.iter().map(|a| a.1).collect();
    is.sort_unstable();
    js.sort_unstable();
    is.dedup();
    js.dedup();
    consistent &= is.len() == atoms.len() && js.len() == atoms.len();

    let dr = psd_decompose(rho_n.operator())?;
    let ds = psd_decompose(sigma_n.operator())?;
    let mut joins = Vec::with_capacity(atoms.len());
    let mut intersections_nonzero = true;
    for &(i, j) in &atoms {
        let (p, q) = (dr.projection(i), ds.projection(j));
        joins.push(psd_decompose(&p.operator().add(q.operator())?)?.support_projection());
        intersections_nonzero &= state::projections_intersect(&p, &q)?;
    }
    let mut blocks_orthogonal = true;
    for k in 0..joins.len() {
        for l in k + 1..joins.len() {
            blocks_orthogonal &= state::projections_orthogonal(&joins[k], &joins[l])?;
        }
    }
    Ok(AffineReport {
        is_affine,
        delta: Some(delta),
        pairing: Some(atoms),
        max_second_derivative,
        second_derivative_at_half,
        pairing_consistent: consistent,
        blocks_orthogonal,
        intersections_nonzero,
    })
}

/// Stein-regime classification of a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteinReport {
    pub psi_at_1: f64,
    /// Limiting type II exponent under vanishing type I error: `−ψ′₋(1)`, or `-inf`.
    pub exponent: f64,
    /// Upper bound on the Stein exponents: `−ψ′₋(1)`, or `-inf`.
    pub upper_bound: f64,
    /// `ψ′₋(1)`, read as the mean relative entropy; `+inf` when `ψ(1) < 0`.
    pub mean_relative_entropy: f64,
}

/// Classify by the sign of `ψ(1)`: `ψ(1) = 0` gives `−ψ′₋(1)`, `ψ(1) < 0` gives `-inf`.
pub fn stein_classify(profile: &PsiProfile, d_left_1: f64) -> SteinReport {
    let psi_at_1 = profile.psi_at_1();
    if psi_at_1 < -1e-9 {
        SteinReport { psi_at_1, exponent: f64::NEG_INFINITY, upper_bound: f64::NEG_INFINITY, mean_relative_entropy: f64::INFINITY }
    } else {
        SteinReport { psi_at_1, exponent: -d_left_1, upper_bound: -d_left_1, mean_relative_entropy: d_left_1 }
    }
}

/// Summary of all exponents derived from a profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentReport {
    pub method: PsiMethod,
    pub chernoff: f64,
    /// Minimizer of `ψ` on `[0, 1]`.
    pub chernoff_s: f64,
    pub interval: (f64, f64),
    pub psi_at_0: f64,
    pub psi_at_1: f64,
    /// Half-width of every exponent's error bar; zero for exact methods.
    pub band: f64,
    pub stein: SteinReport,
    pub warnings: Vec<String>,
}

pub fn exponent_report(profile: &PsiProfile) -> ExponentReport {
    let m = polar_max(profile, 0.0);
    ExponentReport {
        method: profile.method().clone(),
        chernoff: m.value,
        chernoff_s: m.arg,
        interval: profile.interval(),
        psi_at_0: profile.psi_at_0(),
        psi_at_1: profile.psi_at_1(),
        band: profile.sandwich_width(),
        stein: stein_classify(profile, profile.d_left_1()),
        warnings: profile.warnings().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::MarkovChain;
    use faer::c64;

    const LN2: f64 = std::f64::consts::LN_2;

    fn grid() -> Vec<f64> {
        unit_grid(DEFAULT_GRID_POINTS)
    }

    fn zero_profile() -> PsiProfile {
        PsiProfile::from_function(|_| 0.0, &grid()).unwrap()
    }

    fn pure_profile() -> PsiProfile {
        PsiProfile::from_function(|_| -LN2, &grid()).unwrap()
    }

    fn bernoulli() -> PsiProfile {
        let pair = ClassicalPair::from_distributions(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        PsiProfile::from_pair(pair, 1, &grid()).unwrap()
    }

    /// Independent 1-D minimization of ψ by dense sampling plus ternary search.
    fn min_psi_oracle(f: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
    }

    #[test]
    fn phi_of_constant_profiles() {
        let z = zero_profile();
        for a in [-2.0, -0.3, 0.0, 0.4, 3.0] {
            assert!((legendre_phi(&z, a) - a.max(0.0)).abs() < 1e-12);
        }
        let p = pure_profile();
        for a in [-2.0, 0.0, 0.7] {
            assert!((legendre_phi(&p, a) - (LN2 + a.max(0.0))).abs() < 1e-12);
        }
        assert!((hat_phi(&z, -1.0) - 1.0).abs() < 1e-12);
        assert!(hat_phi(&z, 2.0).abs() < 1e-12);
        assert!((chernoff_exponent(&p) - LN2).abs() < 1e-12);
        assert!(chernoff_exponent(&z).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_chernoff_matches_oracle() {
        let prof = bernoulli();
        let oracle = -min_psi_oracle(|s| (0.5f64.powf(s) * 0.9f64.powf(1.0 - s) + 0.5f64.powf(s) * 0.1f64.powf(1.0 - s)).ln());
        assert!((chernoff_exponent(&prof) - oracle).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_hat_phi_strictly_decreasing() {
        let prof = bernoulli();
        let d1 = prof.d_left_1();
        let pts: Vec<f64> = (0..200).map(|k| -3.0 + (d1 + 3.0) * k as f64 / 200.0).collect();
        let v: Vec<f64> = pts.iter().map(|&a| hat_phi(&prof, a)).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn boundary_derivatives_match_relative_entropies() {
        let prof = bernoulli();
        let d_pq = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let d_qp = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((prof.d_left_1() - d_pq).abs() < 1e-8);
        assert!((prof.d_right_0() + d_qp).abs() < 1e-8);
        assert!(prof.is_discretely_convex(1e-9));
        let z = zero_profile();
        assert_eq!(z.interval(), (0.0, 0.0));
    }

    #[test]
    fn iid_boundary_derivative_is_relative_entropy() {
        let rho = StateFamily::Iid(DensityOperator::diagonal(&[1.0, 0.0]).unwrap());
        let sigma = StateFamily::Iid(DensityOperator::maximally_mixed(2));
        let prof = psi_limit(&rho, &sigma, &grid()).unwrap();
        assert_eq!(prof.method(), &PsiMethod::ExactIid);
        assert!((prof.d_left_1() - LN2).abs() < 1e-9);
        assert!(prof.warnings().is_empty());
        let stein = stein_classify(&prof, prof.d_left_1());
        assert!((stein.exponent + LN2).abs() < 1e-9);
    }

    #[test]
    fn hoeffding_pure_state() {
        let p = pure_profile();
        let h = hoeffding_solve(&p, LN2);
        assert!(h.a_r.abs() < 1e-9, "{h:?}");
        assert!((h.b_r - LN2).abs() < 1e-9);
        assert!((h.exponent + LN2).abs() < 1e-9);
        let h = hoeffding_solve(&p, LN2 + 1.0);
        assert!((h.a_r + 1.0).abs() < 1e-9, "{h:?}");
        assert!((h.b_r - LN2).abs() < 1e-9);
        let h = hoeffding_solve(&p, 0.5);
        assert_eq!(h.exponent, f64::NEG_INFINITY);
    }

    #[test]
    fn hoeffding_duality_on_bernoulli() {
        let prof = bernoulli();
        let start = -prof.psi_at_1();
        for k in 0..20 {
            let r = start + 1e-3 + 2.0 * k as f64 / 19.0;
            let h = hoeffding_solve(&prof, r);
            assert!((hat_phi(&prof, h.a_r) - r).abs() <= 1e-10, "r={r} {h:?}");
            assert!((h.b_r - legendre_phi(&prof, h.a_r)).abs() <= 1e-8, "r={r} {h:?}");
        }
    }

    #[test]
    fn stein_pure_state_is_minus_infinity() {
        let p = pure_profile();
        let s = stein_classify(&p, p.d_left_1());
        assert_eq!(s.exponent, f64::NEG_INFINITY);
        assert_eq!(s.mean_relative_entropy, f64::INFINITY);
        let z = zero_profile();
        assert_eq!(stein_classify(&z, 0.0).exponent, 0.0);
    }

    #[test]
    fn relative_entropy_examples() {
        let a = DensityOperator::diagonal(&[1.0, 0.0]).unwrap();
        let h = DensityOperator::maximally_mixed(2);
        assert!(relative_entropy(&h, &h).unwrap().abs() < 1e-14);
        assert!((relative_entropy(&a, &h).unwrap() - LN2).abs() < 1e-14);
        assert_eq!(relative_entropy(&h, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psi_n_trivial_examples() {
        let h = DensityOperator::maximally_mixed(3);
        assert!(psi_n(&h, &h, 1, 0.3).unwrap().abs() < 1e-14);
        let zero = DensityOperator::basis(2, 0);
        let plus = DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(1.0, 0.0)]).unwrap();
        for s in [0.0, 0.25, 1.0] {
            assert!((psi_n(&zero, &plus, 1, s).unwrap() + LN2).abs() < 1e-12);
        }
        assert_eq!(psi_n(&zero, &DensityOperator::basis(2, 1), 1, 0.5).unwrap(), f64::NEG_INFINITY);
    }

    fn flip(t: f64) -> MarkovChain {
        MarkovChain::new(vec![vec![1.0 - t, t], vec![t, 1.0 - t]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn classical_symmetric_chains_have_closed_form() {
        let (t, u) = (0.2, 0.35);
        let rho = StateFamily::ClassicalMarkov(flip(t));
        let sigma = StateFamily::ClassicalMarkov(flip(u));
        let prof = psi_limit(&rho, &sigma, &grid()).unwrap();
        assert_eq!(prof.method(), &PsiMethod::TransferMatrix);
        for s in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let closed = ((1.0 - t).powf(s) * (1.0 - u).powf(1.0 - s) + t.powf(s) * u.powf(1.0 - s)).ln();
            assert!((prof.psi(s) - closed).abs() < 1e-12, "s={s}");
        }
        let rel = t * (t / u).ln() + (1.0 - t) * ((1.0 - t) / (1.0 - u)).ln();
        let a = QuantumHiddenMarkov::classical(flip(t));
        let b = QuantumHiddenMarkov::classical(flip(u));
        assert!((markov_mean_relative_entropy(&a, &b).unwrap() - rel).abs() < 1e-14);
        assert!((prof.d_left_1() - rel).abs() < 1e-8);
    }

    #[test]
    fn transfer_matrix_identical_models_is_stochastic() {
        let a = QuantumHiddenMarkov::classical(flip(0.3));
        let tm = transfer_matrix_q(&a, &a, 0.37).unwrap();
        assert!((tm.spectral_radius - 1.0).abs() < 1e-12);
        for (x, row) in tm.q.iter().enumerate() {
            for (y, v) in row.iter().enumerate() {
                assert!((v - a.chain().t(x, y)).abs() < 1e-14);
            }
        }
        assert!(tm.irreducible);
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&[vec![0.0, 1.0], vec![1.0, 0.0]]) - 1.0).abs() < 1e-12);
        assert!((spectral_radius(&[vec![2.0, 0.0], vec![0.0, 0.5]]) - 2.0).abs() < 1e-12);
        assert!((spectral_radius(&[vec![0.5, 0.25], vec![0.1, 0.3]]) - 0.5 * (0.8 + (0.04f64 + 0.1).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn affine_examples() {
        let zero = DensityOperator::basis(2, 0);
        let plus = DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(1.0, 0.0)]).unwrap();
        let rep = affine_structure(&zero, &plus).unwrap();
        assert!(rep.is_affine);
        assert!((rep.delta.unwrap() - 1.0).abs() < 1e-12);
        assert!(rep.pairing_consistent);
        let rho = DensityOperator::diagonal(&[0.75, 0.25]).unwrap();
        let sigma = DensityOperator::diagonal(&[0.25, 0.75]).unwrap();
        let rep = affine_structure(&rho, &sigma).unwrap();
        assert!(!rep.is_affine);
        assert!(rep.second_derivative_at_half > 0.1);
        let rep = affine_structure(&rho, &rho).unwrap();
        assert!(rep.is_affine && rep.pairing_consistent && rep.blocks_orthogonal && rep.intersections_nonzero);
        assert!((rep.delta.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_line_transform_flags_truncation() {
        let prof = bernoulli();
        let mid = 0.5 * (prof.d_right_0() + prof.d_left_1());
        let v = legendre_full_line(&prof, mid, 8.0).unwrap();
        assert!(!v.truncated);
        assert!((0.0..=1.0).contains(&v.arg));
        assert!((v.value - legendre_phi(&prof, mid)).abs() < 1e-9);
        let far = legendre_full_line(&prof, 50.0, 8.0).unwrap();
        assert!(far.truncated);
        assert!(prof.psi_extended(1.5).beyond_factorization_guarantee);
    }
}
