//! Reduction of a pair of quantum states to a pair of classical measures with
//! the same `s`-moments, and exact error evaluation for classical products.

use std::collections::BTreeMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::operator::DEFAULT_GROUP_TOL;
use crate::numeric::{self, log_add_exp, log_sum_exp, CompensatedSum};
use crate::state::DensityOperator;

/// Overlaps `Tr P_i Q_j` at or below this value are dropped.
pub const ATOM_PRUNE_TOL: f64 = 1e-14;

/// Maximum number of distinct log-likelihood values tracked by [`product_error_exact`].
pub const RATIO_LATTICE_CAP: usize = 1_000_000;

/// Two measures on a common finite support, indexed by pairs of spectral levels.
#[derive(Clone, Debug)]
pub struct ClassicalPair {
    atoms: Vec<(usize, usize)>,
    p: Vec<f64>,
    q: Vec<f64>,
    overlap: Vec<f64>,
    rho_levels: Vec<f64>,
    sigma_levels: Vec<f64>,
}

impl ClassicalPair {
    /// Pair of distributions on the same index set; entries where either side
    /// vanishes are dropped, so atoms are `(k, k)` for the common support.
    pub fn from_distributions(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { left: p.len(), right: q.len() });
        }
        check_distribution(p)?;
        check_distribution(q)?;
        let mut pair = Self {
            atoms: Vec::new(),
            p: Vec::new(),
            q: Vec::new(),
            overlap: Vec::new(),
            rho_levels: p.to_vec(),
            sigma_levels: q.to_vec(),
        };
        for k in 0..p.len() {
            if p[k] > 0.0 && q[k] > 0.0 {
                pair.atoms.push((k, k));
                pair.p.push(p[k]);
                pair.q.push(q[k]);
                pair.overlap.push(1.0);
            }
        }
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index pairs `(i, j)` of the spectral levels of `ρ` and `σ`.
    pub fn atoms(&self) -> &[(usize, usize)] {
        &self.atoms
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `Tr P_i Q_j` per atom.
    pub fn overlaps(&self) -> &[f64] {
        &self.overlap
    }

    /// Distinct eigenvalues of `ρ` indexed by the first atom coordinate.
    pub fn rho_levels(&self) -> &[f64] {
        &self.rho_levels
    }

    /// Distinct eigenvalues of `σ` indexed by the second atom coordinate.
    pub fn sigma_levels(&self) -> &[f64] {
        &self.sigma_levels
    }

    pub fn total_p(&self) -> f64 {
        numeric::sum(self.p.iter().copied())
    }

    pub fn total_q(&self) -> f64 {
        numeric::sum(self.q.iter().copied())
    }

    /// Per-atom log-likelihood ratio `log p − log q = log λ_i − log η_j`.
    pub fn log_ratios(&self) -> Vec<f64> {
        self.p.iter().zip(&self.q).map(|(p, q)| p.ln() - q.ln()).collect()
    }

    /// Full distributions over the atoms plus two remainder points carrying the
    /// mass of `ρ` outside `supp σ` and of `σ` outside `supp ρ`.
    pub fn completed_distributions(&self) -> (Vec<f64>, Vec<f64>) {
        let mut p = self.p.clone();
        let mut q = self.q.clone();
        p.extend([(1.0 - self.total_p()).max(0.0), 0.0]);
        q.extend([0.0, (1.0 - self.total_q()).max(0.0)]);
        let (tp, tq) = (numeric::sum(p.iter().copied()), numeric::sum(q.iter().copied()));
        p.iter_mut().for_each(|x| *x /= tp);
        q.iter_mut().for_each(|x| *x /= tq);
        (p, q)
    }

    /// `Σ p^s q^{1−s}`.
    pub fn moment(&self, s: f64) -> f64 {
        numeric::sum(self.p.iter().zip(&self.q).map(|(&p, &q)| moment_term(p, q, s)))
    }

    /// `log Σ p^s q^{1−s}`, `-inf` for an empty pair.
    pub fn log_moment(&self, s: f64) -> f64 {
        log_sum_exp(self.p.iter().zip(&self.q).map(|(p, q)| s * p.ln() + (1.0 - s) * q.ln()))
    }

    /// Tilted distribution `p_s ∝ p^s q^{1−s}` (unnormalized weights returned normalized).
    pub fn tilted(&self, s: f64) -> Vec<f64> {
        let logs: Vec<f64> = self.p.iter().zip(&self.q).map(|(p, q)| s * p.ln() + (1.0 - s) * q.ln()).collect();
        let z = log_sum_exp(logs.iter().copied());
        logs.into_iter().map(|l| (l - z).exp()).collect()
    }

    /// Variance of the log-likelihood ratio under the tilted distribution:
    /// the second derivative of `s ↦ log Σ p^s q^{1−s}`.
    pub fn log_moment_second_derivative(&self, s: f64) -> f64 {
        let w = self.tilted(s);
        let f = self.log_ratios();
        let mean = numeric::sum(w.iter().zip(&f).map(|(w, f)| w * f));
        numeric::sum(w.iter().zip(&f).map(|(w, f)| w * (f - mean) * (f - mean))).max(0.0)
    }

    /// First derivative of `s ↦ log Σ p^s q^{1−s}`: the tilted mean of the log ratio.
    pub fn log_moment_derivative(&self, s: f64) -> f64 {
        let w = self.tilted(s);
        numeric::sum(w.iter().zip(self.log_ratios()).map(|(w, f)| w * f))
    }
}

fn moment_term(p: f64, q: f64, s: f64) -> f64 {
    if s == 0.0 {
        q
    } else if s == 1.0 {
        p
    } else {
        (s * p.ln() + (1.0 - s) * q.ln()).exp()
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("distribution entries must be finite and nonnegative".into()));
    }
    let t = numeric::sum(p.iter().copied());
    if (t - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { trace: t });
    }
    Ok(())
}

/// Classical measures `p(i,j) = λ_i Tr P_iQ_j`, `q(i,j) = η_j Tr P_iQ_j` built from
/// the positive spectral levels of `ρ` and `σ`.
///
/// When both operators are diagonal the levels are read off the diagonals
/// without an eigendecomposition.
///
/// ```
/// use quantum_exponents::classical::nussbaum_szkola;
/// use quantum_exponents::operator::trace_power_product;
/// use quantum_exponents::state::DensityOperator;
///
/// let rho = DensityOperator::diagonal(&[0.7, 0.3]).unwrap();
/// let sigma = DensityOperator::maximally_mixed(2);
/// let pair = nussbaum_szkola(&rho, &sigma).unwrap();
/// let quantum = trace_power_product(rho.operator(), sigma.operator(), 0.4).unwrap();
/// assert!((pair.moment(0.4) - quantum).abs() < 1e-12);
/// ```
pub fn nussbaum_szkola(rho: &DensityOperator, sigma: &DensityOperator) -> Result<ClassicalPair> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { left: rho.dim(), right: sigma.dim() });
    }
    if let (Some(p), Some(q)) = (rho.operator().diagonal_entries(), sigma.operator().diagonal_entries()) {
        return Ok(diagonal_pair(&p, &q));
    }
    nussbaum_szkola_spectral(rho, sigma)
}

/// Group diagonal entries into levels the way the spectral decomposition
/// groups eigenvalues: sorted neighbours within `tol (1 + max)` merge.
fn diagonal_levels(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = DEFAULT_GROUP_TOL * (1.0 + norm);
    let mut level_of = vec![0; v.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in &idx {
        match groups.last_mut() {
            Some(g) if v[k] - v[*g.last().unwrap()] <= tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let levels = groups
        .iter()
        .enumerate()
        .map(|(l, g)| {
            g.iter().for_each(|&k| level_of[k] = l);
            numeric::sum(g.iter().map(|&k| v[k])) / g.len() as f64
        })
        .collect();
    (levels, level_of)
}

fn diagonal_pair(p: &[f64], q: &[f64]) -> ClassicalPair {
    let (lp, ip) = diagonal_levels(p);
    let (lq, iq) = diagonal_levels(q);
    // same zero threshold as the spectral path: dim * 1e-12 * λ_max
    let thr = |levels: &[f64]| p.len() as f64 * 1e-12 * levels.iter().fold(0.0f64, |m, x| m.max(*x));
    let (tp, tq) = (thr(&lp), thr(&lq));
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for k in 0..p.len() {
        if lp[ip[k]] > tp && lq[iq[k]] > tq {
            *counts.entry((ip[k], iq[k])).or_default() += 1;
        }
    }
    let mut pair =
        ClassicalPair { atoms: Vec::new(), p: Vec::new(), q: Vec::new(), overlap: Vec::new(), rho_levels: Vec::new(), sigma_levels: Vec::new() };
    for ((i, j), c) in counts {
        let t = c as f64;
        pair.atoms.push((i, j));
        pair.p.push(lp[i] * t);
        pair.q.push(lq[j] * t);
        pair.overlap.push(t);
    }
    pair.rho_levels = lp;
    pair.sigma_levels = lq;
    pair
}

/// [`nussbaum_szkola`] always through the grouped spectral decompositions, so
/// atom indices refer to the levels of [`DensityOperator::decompose`].
pub(crate) fn nussbaum_szkola_spectral(rho: &DensityOperator, sigma: &DensityOperator) -> Result<ClassicalPair> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { left: rho.dim(), right: sigma.dim() });
    }
    let dr = rho.decompose()?;
    let ds = sigma.decompose()?;
    let u = dr.vectors();
    let v = ds.vectors();
    let overlap: Mat<faer::c64> = u.adjoint() * v;
    let sr = dr.support_levels();
    let ss = ds.support_levels();
    let mut pair = ClassicalPair {
        atoms: Vec::new(),
        p: Vec::new(),
        q: Vec::new(),
        overlap: Vec::new(),
        rho_levels: dr.eigenvalues().to_vec(),
        sigma_levels: ds.eigenvalues().to_vec(),
    };
    for &i in &sr {
        for &j in &ss {
            let mut acc = CompensatedSum::new();
            for a in dr.group_range(i) {
                for b in ds.group_range(j) {
                    acc.add(overlap[(a, b)].norm_sqr());
                }
            }
            let t = acc.value();
            if t > ATOM_PRUNE_TOL {
                pair.atoms.push((i, j));
                pair.p.push(dr.eigenvalues()[i] * t);
                pair.q.push(ds.eigenvalues()[j] * t);
                pair.overlap.push(t);
            }
        }
    }
    Ok(pair)
}

/// Both sides of the moment identity and their distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentCheck {
    pub classical: f64,
    pub quantum: f64,
    pub gap: f64,
}

impl MomentCheck {
    /// `gap ≤ 1e-10 (1 + quantum)`.
    pub fn holds(&self) -> bool {
        self.gap <= 1e-10 * (1.0 + self.quantum.abs())
    }
}

/// Compare `Σ p^s q^{1−s}` with `Tr ρ^s σ^{1−s}` evaluated through matrix powers.
pub fn moment_identity(pair: &ClassicalPair, rho: &DensityOperator, sigma: &DensityOperator, s: f64) -> Result<MomentCheck> {
    let classical = pair.moment(s);
    let quantum = crate::operator::trace_power_product(rho.operator(), sigma.operator(), s)?;
    Ok(MomentCheck { classical, quantum, gap: (classical - quantum).abs() })
}

/// Lower bound `½ Σ min(e^{−na} p, q)` on the combined error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinSumBound {
    pub lower: f64,
    pub holds: bool,
}

/// Check `e_n(a) ≥ ½ Σ min(e^{−na} p, q)` for a pair built from the `n`-site densities.
pub fn min_sum_bound(pair: &ClassicalPair, a: f64, n: usize, e_n: f64) -> MinSumBound {
    let shift = -(n as f64) * a;
    let lower = 0.5
        * numeric::sum(pair.p.iter().zip(&pair.q).map(|(p, q)| (shift + p.ln()).min(q.ln()).exp()));
    MinSumBound { lower, holds: e_n >= lower - 1e-12 }
}

/// A finitely supported real random variable (possibly defective: weights may
/// sum to less than one).
#[derive(Clone, Debug, PartialEq)]
pub struct RateVariable {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RateVariable {
    fn collect(values: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut atoms: Vec<f64> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        for k in idx {
            match atoms.last() {
                Some(&last) if (values[k] - last).abs() <= 1e-12 * last.abs().max(1.0) => {
                    *w.last_mut().unwrap() += weights[k];
                }
                _ => {
                    atoms.push(values[k]);
                    w.push(weights[k]);
                }
            }
        }
        Self { atoms, weights: w }
    }

    pub fn total_mass(&self) -> f64 {
        numeric::sum(self.weights.iter().copied())
    }

    /// Mass of `{X ≥ t}`.
    pub fn mass_at_least(&self, t: f64) -> f64 {
        numeric::sum(self.atoms.iter().zip(&self.weights).filter(|(x, _)| **x >= t).map(|(_, w)| *w))
    }

    /// Mass of `{X > t}`.
    pub fn mass_above(&self, t: f64) -> f64 {
        numeric::sum(self.atoms.iter().zip(&self.weights).filter(|(x, _)| **x > t).map(|(_, w)| *w))
    }
}

/// `X = (1/n) log(q/p)` under `p` and `Y = (1/n) log(p/q)` under `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateVariables {
    pub x: RateVariable,
    pub y: RateVariable,
}

impl RateVariables {
    /// `p({X ≥ −a})`, the type I error of the threshold test.
    pub fn alpha_tail(&self, a: f64) -> f64 {
        self.x.mass_at_least(-a)
    }

    /// `q({Y > a})`, the type II error of the threshold test.
    pub fn beta_tail(&self, a: f64) -> f64 {
        self.y.mass_above(a)
    }
}

/// Log-likelihood rate variables of a pair built from `n`-site densities.
pub fn rate_variables(pair: &ClassicalPair, n: usize) -> RateVariables {
    let inv = 1.0 / n as f64;
    let ratios = pair.log_ratios();
    let x = RateVariable::collect(ratios.iter().map(|l| -l * inv).collect(), pair.p.clone());
    let y = RateVariable::collect(ratios.iter().map(|l| l * inv).collect(), pair.q.clone());
    RateVariables { x, y }
}

/// Exact error probabilities of the product threshold test, in log domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductError {
    /// `log α_n`, `-inf` when `α_n = 0`.
    pub log_alpha: f64,
    /// `log β_n`, `-inf` when `β_n = 0`.
    pub log_beta: f64,
    /// `p₁` and `q₁` are proportional on their common support; the closed form was used.
    pub degenerate_ratio: bool,
    /// Distinct log-likelihood values in the final lattice.
    pub lattice_size: usize,
}

impl ProductError {
    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn alpha_slope(&self, n: usize) -> f64 {
        self.log_alpha / n as f64
    }

    pub fn beta_slope(&self, n: usize) -> f64 {
        self.log_beta / n as f64
    }
}

struct LatticeState {
    counts: Vec<u32>,
    value: f64,
    log_p: f64,
    log_q: f64,
}

fn merge_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// `α_n = p₁^{⊗n}(L ≤ na)` and `β_n = q₁^{⊗n}(L > na)` for the test
/// `{e^{−na} p₁^{⊗n} > q₁^{⊗n}}`, where `L` is the summed log-likelihood ratio.
///
/// Words touching a point with `p₁ > 0 = q₁` always lie in the test and never
/// contribute; words touching `p₁ = 0` never lie in it and carry no `p`-mass,
/// so only the common support enters. Ties `L = na` are excluded from the test.
pub fn product_error_exact(p1: &[f64], q1: &[f64], a: f64, n: usize) -> Result<ProductError> {
    product_error_exact_capped(p1, q1, a, n, RATIO_LATTICE_CAP)
}

/// [`product_error_exact`] with an explicit cap on the lattice size.
pub fn product_error_exact_capped(p1: &[f64], q1: &[f64], a: f64, n: usize, cap: usize) -> Result<ProductError> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of sites must be at least 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold a = {a} must be finite")));
    }
    let pair = ClassicalPair::from_distributions(p1, q1)?;
    let threshold = n as f64 * a;
    if pair.is_empty() {
        return Ok(ProductError {
            log_alpha: f64::NEG_INFINITY,
            log_beta: f64::NEG_INFINITY,
            degenerate_ratio: false,
            lattice_size: 0,
        });
    }
    let ratios = pair.log_ratios();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    if hi - lo <= merge_tol(hi.abs().max(lo.abs())) {
        let l = n as f64 * numeric::sum(ratios.iter().copied()) / ratios.len() as f64;
        let nn = n as f64;
        let in_test = l - threshold > merge_tol(l);
        let (log_alpha, log_beta) = if in_test {
            (f64::NEG_INFINITY, nn * pair.total_q().ln())
        } else {
            (nn * pair.total_p().ln(), f64::NEG_INFINITY)
        };
        return Ok(ProductError { log_alpha, log_beta, degenerate_ratio: true, lattice_size: 1 });
    }

    let m = pair.len();
    let log_p: Vec<f64> = pair.p().iter().map(|x| x.ln()).collect();
    let log_q: Vec<f64> = pair.q().iter().map(|x| x.ln()).collect();
    let mut states = vec![LatticeState { counts: vec![0; m], value: 0.0, log_p: 0.0, log_q: 0.0 }];
    for _ in 0..n {
        let mut next: Vec<LatticeState> = Vec::with_capacity(states.len() * m);
        for st in &states {
            for k in 0..m {
                let mut counts = st.counts.clone();
                counts[k] += 1;
                let value = numeric::sum(counts.iter().zip(&ratios).map(|(&c, &l)| c as f64 * l));
                next.push(LatticeState { counts, value, log_p: st.log_p + log_p[k], log_q: st.log_q + log_q[k] });
            }
        }
        next.sort_by(|x, y| x.value.total_cmp(&y.value));
        let mut merged: Vec<LatticeState> = Vec::with_capacity(next.len());
        for st in next {
            match merged.last_mut() {
                Some(last) if st.value - last.value <= merge_tol(last.value) => {
                    last.log_p = log_add_exp(last.log_p, st.log_p);
                    last.log_q = log_add_exp(last.log_q, st.log_q);
                }
                _ => merged.push(st),
            }
        }
        if merged.len() > cap {
            return Err(Error::RatioLatticeOverflow { cap });
        }
        states = merged;
    }
    let mut log_alpha = f64::NEG_INFINITY;
    let mut log_beta = f64::NEG_INFINITY;
    for st in &states {
        if st.value - threshold > merge_tol(st.value) {
            log_beta = log_add_exp(log_beta, st.log_q);
        } else {
            log_alpha = log_add_exp(log_alpha, st.log_p);
        }
    }
    Ok(ProductError { log_alpha, log_beta, degenerate_ratio: false, lattice_size: states.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_density;
    use faer::c64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus() -> DensityOperator {
        DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn maximally_mixed_gives_single_atom() {
        let h = DensityOperator::maximally_mixed(2);
        let pair = nussbaum_szkola(&h, &h).unwrap();
        assert_eq!(pair.len(), 1);
        assert!((pair.p()[0] - 1.0).abs() < 1e-12 && (pair.q()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_pair_gives_half_atom() {
        let pair = nussbaum_szkola(&DensityOperator::basis(2, 0), &plus()).unwrap();
        assert_eq!(pair.len(), 1);
        assert!((pair.p()[0] - 0.5).abs() < 1e-12 && (pair.q()[0] - 0.5).abs() < 1e-12);
        for s in [0.0, 0.3, 1.0] {
            assert!((pair.moment(s) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_pair_is_diagonal() {
        let rho = DensityOperator::diagonal(&[0.6, 0.3, 0.1]).unwrap();
        let sigma = DensityOperator::diagonal(&[0.2, 0.5, 0.3]).unwrap();
        let pair = nussbaum_szkola(&rho, &sigma).unwrap();
        assert_eq!(pair.len(), 3);
        let mut rows: Vec<(f64, f64)> = pair.p().iter().copied().zip(pair.q().iter().copied()).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expected = [(0.1, 0.3), (0.3, 0.5), (0.6, 0.2)];
        for (got, want) in rows.iter().zip(expected) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_identity_on_random_qutrits() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 3, 3);
            let sigma = random_density(&mut rng, 3, 2);
            let pair = nussbaum_szkola(&rho, &sigma).unwrap();
            assert!(pair.total_p() <= 1.0 + 1e-10 && pair.total_q() <= 1.0 + 1e-10);
            for k in 0..=10 {
                let check = moment_identity(&pair, &rho, &sigma, k as f64 / 10.0).unwrap();
                assert!(check.holds(), "{check:?}");
            }
        }
    }

    #[test]
    fn min_sum_trivial_cases() {
        let h = DensityOperator::maximally_mixed(2);
        let pair = nussbaum_szkola(&h, &h).unwrap();
        let b = min_sum_bound(&pair, 0.0, 1, 1.0);
        assert!((b.lower - 0.5).abs() < 1e-12 && b.holds);
        let pair = nussbaum_szkola(&DensityOperator::basis(2, 0), &DensityOperator::basis(2, 1)).unwrap();
        let b = min_sum_bound(&pair, 0.0, 1, 0.0);
        assert_eq!(b.lower, 0.0);
        assert!(b.holds);
    }

    #[test]
    fn rate_variables_trivial_cases() {
        let pair = ClassicalPair::from_distributions(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        let rv = rate_variables(&pair, 4);
        assert_eq!(rv.x.atoms, vec![0.0]);
        assert!((rv.x.total_mass() - 1.0).abs() < 1e-15);
        let pair = nussbaum_szkola(&DensityOperator::basis(2, 0), &plus()).unwrap();
        let rv = rate_variables(&pair, 1);
        assert_eq!(rv.y.atoms.len(), 1);
        assert!(rv.y.atoms[0].abs() < 1e-12);
        assert!((rv.y.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_error_trivial_cases() {
        let e = product_error_exact(&[0.4, 0.6], &[0.4, 0.6], -0.1, 7).unwrap();
        assert!(e.degenerate_ratio);
        assert_eq!(e.log_alpha, f64::NEG_INFINITY);
        assert!(e.log_beta.abs() < 1e-12);
        let e = product_error_exact(&[1.0, 0.0], &[0.0, 1.0], 0.0, 5).unwrap();
        assert_eq!((e.log_alpha, e.log_beta), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    }

    fn brute_force(p: &[f64], q: &[f64], a: f64, n: usize) -> (f64, f64) {
        let m = p.len();
        let mut alpha = 0.0;
        let mut beta = 0.0;
        let mut word = vec![0usize; n];
        for idx in 0..m.pow(n as u32) {
            let mut r = idx;
            for w in word.iter_mut() {
                *w = r % m;
                r /= m;
            }
            let pw: f64 = word.iter().map(|&k| p[k]).product();
            let qw: f64 = word.iter().map(|&k| q[k]).product();
            if (-(n as f64) * a).exp() * pw > qw {
                beta += qw;
            } else {
                alpha += pw;
            }
        }
        (alpha, beta)
    }

    #[test]
    fn product_error_matches_enumeration() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.3, 0.5];
        for n in 1..=6 {
            for a in [-0.4, -0.05, 0.13, 0.5] {
                let e = product_error_exact(&p, &q, a, n).unwrap();
                let (alpha, beta) = brute_force(&p, &q, a, n);
                assert!((e.alpha() - alpha).abs() < 1e-13, "n={n} a={a}");
                assert!((e.beta() - beta).abs() < 1e-13, "n={n} a={a}");
            }
        }
    }

    #[test]
    fn product_error_bernoulli_lattice_is_linear() {
        let e = product_error_exact(&[0.5, 0.5], &[0.9, 0.1], 0.07, 400).unwrap();
        assert_eq!(e.lattice_size, 401);
        assert!(e.log_alpha.is_finite() && e.log_beta.is_finite());
    }

    #[test]
    fn lattice_cap_is_enforced() {
        let p = [0.25, 0.25, 0.25, 0.25];
        let q = [0.1, 0.2, 0.3, 0.4];
        assert!(matches!(
            product_error_exact_capped(&p, &q, 0.0, 20, 100),
            Err(Error::RatioLatticeOverflow { cap: 100 })
        ));
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let pair = ClassicalPair::from_distributions(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        let h = 1e-3;
        let s = 0.37;
        let fd = (pair.log_moment(s + h) - 2.0 * pair.log_moment(s) + pair.log_moment(s - h)) / (h * h);
        assert!((pair.log_moment_second_derivative(s) - fd).abs() < 1e-5);
    }
}
