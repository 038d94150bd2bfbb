//! Translation-invariant state families on a finite spin chain and their
//! `n`-site restrictions.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use faer::c64;

use crate::error::{Error, Result};
use crate::operator::{
    self, kron_capped, psd_decompose, HermitianOperator, Projection, SpectralDecomposition, DEFAULT_SIZE_CAP,
};

/// Positive semidefinite operator with unit trace.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    /// Validate `min eig ≥ -1e-10` and `|Tr - 1| ≤ 1e-10`.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { trace });
        }
        let min = op.min_eigenvalue()?;
        if min < -1e-10 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(Self { op })
    }

    /// Wrap an operator known to be a density by construction.
    pub(crate) fn from_operator_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    /// Normalized pure state `|v><v| / <v|v>`.
    pub fn pure(v: &[c64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("pure state vector must be nonzero".into()));
        }
        Ok(Self { op: HermitianOperator::outer(v).scaled(1.0 / norm) })
    }

    /// Computational basis state `|k><k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut d = vec![0.0; dim];
        d[k] = 1.0;
        Self { op: HermitianOperator::diagonal(&d) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scaled(1.0 / dim as f64) }
    }

    /// Diagonal density from a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be finite and nonnegative".into()));
        }
        Self::new(HermitianOperator::diagonal(probs))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Spectral decomposition with the default grouping tolerance.
    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        psd_decompose(&self.op)
    }

    pub fn support_projection(&self) -> Result<Projection> {
        Ok(self.decompose()?.support_projection())
    }

    /// Convex mixture `Σ w_i ρ_i` of densities of equal dimension.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let dim = parts.first().map(|(_, d)| d.dim()).ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let mut acc = HermitianOperator::zeros(dim);
        for (w, d) in parts {
            acc = acc.linear_combination(1.0, d.operator(), *w)?;
        }
        Self::new(acc)
    }

    fn hash_into(&self, h: &mut impl Hasher) {
        hash_operator(&self.op, h);
    }
}

fn hash_operator(op: &HermitianOperator, h: &mut impl Hasher) {
    op.dim().hash(h);
    for j in 0..op.dim() {
        for i in 0..op.dim() {
            let z = op.entry(i, j);
            z.re.to_bits().hash(h);
            z.im.to_bits().hash(h);
        }
    }
}

/// A row-stochastic matrix with a faithful stationary distribution.
#[derive(Clone, Debug)]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl MarkovChain {
    /// Validate `T` (nonnegative, rows summing to 1 within `1e-12`) and `r`
    /// (strictly positive, `rT = r` within `1e-12`).
    pub fn new(transition: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty alphabet".into()));
        }
        for (x, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!("transition row {x} has length {}, expected {n}", row.len())));
            }
            if row.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
                return Err(Error::InvalidModel(format!("transition row {x} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("row sums: row {x} sums to {s}")));
            }
        }
        if stationary.len() != n {
            return Err(Error::InvalidModel(format!("stationary vector has length {}, expected {n}", stationary.len())));
        }
        if stationary.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidModel("stationary distribution must be faithful (entrywise > 0)".into()));
        }
        let total: f64 = stationary.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("stationary distribution sums to {total}")));
        }
        for y in 0..n {
            let ry: f64 = (0..n).map(|x| stationary[x] * transition[x][y]).sum();
            if (ry - stationary[y]).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("stationarity: (rT)_{y} = {ry} but r_{y} = {}", stationary[y])));
            }
        }
        Ok(Self { transition, stationary })
    }

    /// Build from `T` alone, solving `rT = r, Σr = 1` by Gaussian elimination.
    pub fn from_transition(transition: Vec<Vec<f64>>) -> Result<Self> {
        let r = stationary_distribution(&transition)?;
        Self::new(transition, r)
    }

    pub fn len(&self) -> usize {
        self.transition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transition.is_empty()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn t(&self, x: usize, y: usize) -> f64 {
        self.transition[x][y]
    }

    /// Probability of a word under the stationary chain.
    pub fn word_probability(&self, word: &[usize]) -> f64 {
        let Some(&first) = word.first() else { return 1.0 };
        word.windows(2).fold(self.stationary[first], |p, w| p * self.transition[w[0]][w[1]])
    }

    fn hash_into(&self, h: &mut impl Hasher) {
        for row in &self.transition {
            for t in row {
                t.to_bits().hash(h);
            }
        }
        for r in &self.stationary {
            r.to_bits().hash(h);
        }
    }
}

fn stationary_distribution(t: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = t.len();
    if n == 0 || t.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidModel("transition matrix must be square and nonempty".into()));
    }
    // (T^T - I) r = 0 with the last equation replaced by Σ r = 1.
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = t[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::InvalidModel("transition matrix has no unique stationary distribution".into()));
        }
        a.swap(col, pivot);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                for k in col..=n {
                    a[i][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut r: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    // One polishing step keeps rT = r at the 1e-12 level.
    for _ in 0..3 {
        let next: Vec<f64> = (0..n).map(|y| (0..n).map(|x| r[x] * t[x][y]).sum()).collect();
        let s: f64 = next.iter().sum();
        r = next.into_iter().map(|v| v / s).collect();
    }
    Ok(r)
}

/// Hidden Markov construction with a classical auxiliary chain: the word
/// `x_1…x_n` emits `θ_{x1x2} ⊗ … ⊗ θ_{x(n-1)xn} ⊗ Θ_{xn}` with
/// `Θ_x = Σ_y T_xy θ_xy`.
#[derive(Clone, Debug)]
pub struct QuantumHiddenMarkov {
    chain: MarkovChain,
    site_dim: usize,
    site_states: Vec<Vec<Option<DensityOperator>>>,
}

impl QuantumHiddenMarkov {
    /// `site_states[x][y]` is required wherever `T_xy > 0`.
    pub fn new(chain: MarkovChain, site_states: Vec<Vec<Option<DensityOperator>>>) -> Result<Self> {
        let n = chain.len();
        if site_states.len() != n || site_states.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!("site state table must be {n}×{n}")));
        }
        let mut site_dim = None;
        for x in 0..n {
            for y in 0..n {
                match &site_states[x][y] {
                    Some(s) => match site_dim {
                        None => site_dim = Some(s.dim()),
                        Some(d) if d != s.dim() => {
                            return Err(Error::DimensionMismatch { left: d, right: s.dim() });
                        }
                        _ => {}
                    },
                    None if chain.t(x, y) > 0.0 => return Err(Error::MissingSiteState { x, y }),
                    None => {}
                }
            }
        }
        let site_dim = site_dim.ok_or_else(|| Error::InvalidModel("no site states given".into()))?;
        Ok(Self { chain, site_dim, site_states })
    }

    /// Classical Markov measure: `θ_xy = |x><x|` on a `|X|`-dimensional site.
    pub fn classical(chain: MarkovChain) -> Self {
        let n = chain.len();
        let site_states = (0..n).map(|x| (0..n).map(|_| Some(DensityOperator::basis(n, x))).collect()).collect();
        Self { chain, site_dim: n, site_states }
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn alphabet_len(&self) -> usize {
        self.chain.len()
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn site_state(&self, x: usize, y: usize) -> Option<&DensityOperator> {
        self.site_states[x][y].as_ref()
    }

    /// `Θ_x = Σ_y T_xy θ_xy`.
    pub fn boundary_state(&self, x: usize) -> DensityOperator {
        let mut acc = HermitianOperator::zeros(self.site_dim);
        for y in 0..self.alphabet_len() {
            let t = self.chain.t(x, y);
            if t > 0.0 {
                let s = self.site_states[x][y].as_ref().expect("validated at construction");
                acc = acc.linear_combination(1.0, s.operator(), t).expect("same dimension");
            }
        }
        DensityOperator::from_operator_unchecked(acc)
    }

    fn hash_into(&self, h: &mut impl Hasher) {
        self.chain.hash_into(h);
        for row in &self.site_states {
            for s in row {
                match s {
                    Some(d) => d.hash_into(h),
                    None => 0u8.hash(h),
                }
            }
        }
    }

    fn restrict(&self, n: usize, cap: usize) -> Result<DensityOperator> {
        check_size(self.site_dim, n, cap)?;
        let k = self.alphabet_len();
        // tails[x] = Σ over words starting at x of the emitted operator on the remaining sites
        let mut tails: Vec<HermitianOperator> = (0..k).map(|x| self.boundary_state(x).into_operator()).collect();
        for _ in 1..n {
            let mut next = Vec::with_capacity(k);
            for x in 0..k {
                let dim = tails[0].dim() * self.site_dim;
                let mut acc = HermitianOperator::zeros(dim);
                for y in 0..k {
                    let t = self.chain.t(x, y);
                    if t > 0.0 {
                        let theta = self.site_states[x][y].as_ref().expect("validated at construction");
                        let term = kron_capped(theta.operator(), &tails[y], cap)?;
                        acc = acc.linear_combination(1.0, &term, t)?;
                    }
                }
                next.push(acc);
            }
            tails = next;
        }
        let mut rho = HermitianOperator::zeros(tails[0].dim());
        for (x, tail) in tails.iter().enumerate() {
            rho = rho.linear_combination(1.0, tail, self.chain.stationary()[x])?;
        }
        Ok(DensityOperator::from_operator_unchecked(rho))
    }
}

/// Local Gibbs densities `exp(-H_n)/Tr exp(-H_n)` for a translation-invariant
/// interaction of range `ℓ` with open boundary conditions.
#[derive(Clone, Debug)]
pub struct LocalGibbs {
    site_dim: usize,
    range: usize,
    local_term: HermitianOperator,
}

impl LocalGibbs {
    /// `local_term` acts on `site_dim^range` and already contains the inverse temperature.
    pub fn new(site_dim: usize, range: usize, local_term: HermitianOperator) -> Result<Self> {
        if site_dim == 0 || range == 0 {
            return Err(Error::InvalidModel("site dimension and range must be positive".into()));
        }
        let expected = site_dim.checked_pow(range as u32).unwrap_or(usize::MAX);
        if local_term.dim() != expected {
            return Err(Error::DimensionMismatch { left: expected, right: local_term.dim() });
        }
        Ok(Self { site_dim, range, local_term })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn local_term(&self) -> &HermitianOperator {
        &self.local_term
    }

    /// `H_n = Σ_{k=0}^{n-ℓ} 1_{d^k} ⊗ h ⊗ 1_{d^{n-ℓ-k}}`.
    pub fn hamiltonian(&self, n: usize, cap: usize) -> Result<HermitianOperator> {
        let dim = check_size(self.site_dim, n, cap)?;
        let mut h = HermitianOperator::zeros(dim);
        if n < self.range {
            return Ok(h);
        }
        for k in 0..=(n - self.range) {
            let left = HermitianOperator::identity(self.site_dim.pow(k as u32));
            let right = HermitianOperator::identity(self.site_dim.pow((n - self.range - k) as u32));
            let term = kron_capped(&kron_capped(&left, &self.local_term, cap)?, &right, cap)?;
            h = h.add(&term)?;
        }
        Ok(h)
    }

    fn restrict(&self, n: usize, cap: usize) -> Result<DensityOperator> {
        let h = self.hamiltonian(n, cap)?;
        let dec = h.spectral_decompose(0.0)?;
        let min = dec.eigenvalues().first().copied().unwrap_or(0.0);
        let unnorm = dec.apply(|l| (-(l - min)).exp());
        let t = unnorm.trace();
        Ok(DensityOperator::from_operator_unchecked(unnorm.scaled(1.0 / t)))
    }
}

/// Generative model for the `n`-site densities of a translation-invariant state.
#[derive(Clone, Debug)]
pub enum StateFamily {
    /// Product state `ρ_1^{⊗n}`.
    Iid(DensityOperator),
    QuantumHiddenMarkov(QuantumHiddenMarkov),
    /// Markov measure, embedded as diagonal densities.
    ClassicalMarkov(MarkovChain),
    LocalGibbs(LocalGibbs),
    /// Stored restrictions `ρ_1, ρ_2, …` of dimensions `d, d², …`.
    Explicit(Vec<DensityOperator>),
}

impl StateFamily {
    /// Validate an explicit list: dimensions must be `d, d², d³, …`.
    pub fn explicit(list: Vec<DensityOperator>) -> Result<Self> {
        let d = list.first().map(DensityOperator::dim).ok_or_else(|| Error::InvalidModel("empty explicit list".into()))?;
        let mut expected = d;
        for (k, rho) in list.iter().enumerate() {
            if rho.dim() != expected {
                return Err(Error::InvalidModel(format!(
                    "explicit restriction {} has dimension {}, expected {expected}",
                    k + 1,
                    rho.dim()
                )));
            }
            expected = expected.saturating_mul(d);
        }
        Ok(Self::Explicit(list))
    }

    /// One-site Hilbert space dimension.
    pub fn site_dim(&self) -> usize {
        match self {
            Self::Iid(rho) => rho.dim(),
            Self::QuantumHiddenMarkov(m) => m.site_dim(),
            Self::ClassicalMarkov(c) => c.len(),
            Self::LocalGibbs(g) => g.site_dim(),
            Self::Explicit(list) => list[0].dim(),
        }
    }

    /// The hidden-Markov form, when the family has one.
    pub fn as_hidden_markov(&self) -> Option<QuantumHiddenMarkov> {
        match self {
            Self::QuantumHiddenMarkov(m) => Some(m.clone()),
            Self::ClassicalMarkov(c) => Some(QuantumHiddenMarkov::classical(c.clone())),
            _ => None,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, Self::Iid(_))
    }

    /// Largest `n` available for explicit families; unbounded otherwise.
    pub fn max_sites(&self) -> Option<usize> {
        match self {
            Self::Explicit(list) => Some(list.len()),
            _ => None,
        }
    }

    /// Deterministic hash of the model content (bit patterns of all entries).
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        match self {
            Self::Iid(rho) => {
                0u8.hash(&mut h);
                rho.hash_into(&mut h);
            }
            Self::QuantumHiddenMarkov(m) => {
                1u8.hash(&mut h);
                m.hash_into(&mut h);
            }
            Self::ClassicalMarkov(c) => {
                2u8.hash(&mut h);
                c.hash_into(&mut h);
            }
            Self::LocalGibbs(g) => {
                3u8.hash(&mut h);
                g.site_dim.hash(&mut h);
                g.range.hash(&mut h);
                hash_operator(&g.local_term, &mut h);
            }
            Self::Explicit(list) => {
                4u8.hash(&mut h);
                for rho in list {
                    rho.hash_into(&mut h);
                }
            }
        }
        h.finish()
    }

    /// `n`-site density with the default size cap.
    pub fn restrict(&self, n: usize) -> Result<DensityOperator> {
        restrict_capped(self, n, DEFAULT_SIZE_CAP)
    }
}

fn check_size(site_dim: usize, n: usize, cap: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(site_dim).filter(|&d| d <= cap).ok_or(Error::SizeOverflow {
            requested: site_dim.checked_pow(n as u32).unwrap_or(usize::MAX),
            cap,
        })?;
    }
    Ok(dim)
}

/// The `n`-site restriction `ρ_n` of a model, with the default size cap.
pub fn restrict(model: &StateFamily, n: usize) -> Result<DensityOperator> {
    restrict_capped(model, n, DEFAULT_SIZE_CAP)
}

/// The `n`-site restriction, refusing results of dimension above `cap`.
pub fn restrict_capped(model: &StateFamily, n: usize, cap: usize) -> Result<DensityOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of sites must be at least 1".into()));
    }
    match model {
        StateFamily::Iid(rho) => {
            check_size(rho.dim(), n, cap)?;
            Ok(DensityOperator::from_operator_unchecked(operator::kron_power(rho.operator(), n, cap)?))
        }
        StateFamily::QuantumHiddenMarkov(m) => m.restrict(n, cap),
        StateFamily::ClassicalMarkov(c) => {
            let dim = check_size(c.len(), n, cap)?;
            let k = c.len();
            let mut word = vec![0usize; n];
            let diag: Vec<f64> = (0..dim)
                .map(|idx| {
                    let mut rem = idx;
                    for site in (0..n).rev() {
                        word[site] = rem % k;
                        rem /= k;
                    }
                    c.word_probability(&word)
                })
                .collect();
            Ok(DensityOperator::from_operator_unchecked(HermitianOperator::diagonal(&diag)))
        }
        StateFamily::LocalGibbs(g) => g.restrict(n, cap),
        StateFamily::Explicit(list) => {
            let rho = list.get(n - 1).ok_or(Error::IndexOutOfRange { requested: n, available: list.len() })?;
            if rho.dim() > cap {
                return Err(Error::SizeOverflow { requested: rho.dim(), cap });
            }
            Ok(rho.clone())
        }
    }
}

type CacheSlot = Arc<OnceLock<Result<Arc<DensityOperator>>>>;

/// Memoized restrictions keyed by `(content hash, n)`.
///
/// Concurrent callers asking for the same key block on a single computation.
#[derive(Debug)]
pub struct RestrictionCache {
    cap: usize,
    slots: Mutex<HashMap<(u64, usize), CacheSlot>>,
}

impl Default for RestrictionCache {
    fn default() -> Self {
        Self::new(DEFAULT_SIZE_CAP)
    }
}

impl RestrictionCache {
    pub fn new(cap: usize) -> Self {
        Self { cap, slots: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, model: &StateFamily, n: usize) -> Result<Arc<DensityOperator>> {
        let key = (model.content_hash(), n);
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            slots.entry(key).or_default().clone()
        };
        slot.get_or_init(|| restrict_capped(model, n, self.cap).map(Arc::new)).clone()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.slots.lock().expect("cache lock poisoned").clear();
    }
}

/// How two supports sit relative to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SupportRelation {
    Equal,
    /// `supp ρ` strictly inside `supp σ`.
    LeftDominates,
    /// `supp σ` strictly inside `supp ρ`.
    RightDominates,
    Incomparable,
    Orthogonal,
}

impl SupportRelation {
    /// Whether `supp ρ ≤ supp σ`.
    pub fn left_in_right(self) -> bool {
        matches!(self, Self::Equal | Self::LeftDominates)
    }
}

const SUPPORT_TOL: f64 = 1e-8;

/// Whether `range P ⊆ range Q`, i.e. `QP = P`.
pub fn projection_le(p: &Projection, q: &Projection) -> Result<bool> {
    let qp = q.operator().product(p.operator())?;
    let n = p.dim();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            dev = dev.max((qp[(i, j)] - p.operator().entry(i, j)).norm());
        }
    }
    Ok(dev <= SUPPORT_TOL)
}

/// Whether `PQ = 0`.
pub fn projections_orthogonal(p: &Projection, q: &Projection) -> Result<bool> {
    let pq = p.operator().product(q.operator())?;
    let n = p.dim();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            m = m.max(pq[(i, j)].norm());
        }
    }
    Ok(m <= SUPPORT_TOL)
}

/// Whether `range P ∩ range Q ≠ {0}`.
pub fn projections_intersect(p: &Projection, q: &Projection) -> Result<bool> {
    let pqp = q.operator().congruence(p.operator().matrix());
    let top = pqp.eigenvalues()?.last().copied().unwrap_or(0.0);
    Ok(top >= 1.0 - SUPPORT_TOL)
}

/// Compare the support projections of two densities.
pub fn support_relation(rho: &DensityOperator, sigma: &DensityOperator) -> Result<SupportRelation> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { left: rho.dim(), right: sigma.dim() });
    }
    let sr = rho.support_projection()?;
    let ss = sigma.support_projection()?;
    relation_of_projections(&sr, &ss)
}

pub(crate) fn relation_of_projections(sr: &Projection, ss: &Projection) -> Result<SupportRelation> {
    if projections_orthogonal(sr, ss)? {
        return Ok(SupportRelation::Orthogonal);
    }
    let left = projection_le(sr, ss)?;
    let right = projection_le(ss, sr)?;
    Ok(match (left, right) {
        (true, true) => SupportRelation::Equal,
        (true, false) => SupportRelation::LeftDominates,
        (false, true) => SupportRelation::RightDominates,
        (false, false) => SupportRelation::Incomparable,
    })
}

/// Three-valued outcome for conditions that need external input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Condition {
    Holds,
    Fails,
    Unknown,
}

/// Support conditions relating two hidden-Markov models over a shared alphabet.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MarkovSupportReport {
    /// Orthogonal block projections `P_x` containing both site supports, with
    /// nonzero intersections.
    pub cond1: Condition,
    /// `T_xy = 0` whenever `S_xy = 0`.
    pub cond2: bool,
    /// `supp θ_xy ≤ supp φ_xy` whenever `T_xy > 0`.
    pub cond3: bool,
}

impl MarkovSupportReport {
    /// `supp ρ_n ≤ supp σ_n` for all `n ≥ 2`.
    pub fn absolutely_continuous(&self) -> bool {
        self.cond2 && self.cond3
    }
}

fn check_markov_pair(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov) -> Result<()> {
    if rho.alphabet_len() != sigma.alphabet_len() {
        return Err(Error::DimensionMismatch { left: rho.alphabet_len(), right: sigma.alphabet_len() });
    }
    if rho.site_dim() != sigma.site_dim() {
        return Err(Error::DimensionMismatch { left: rho.site_dim(), right: sigma.site_dim() });
    }
    Ok(())
}

/// Evaluate the support conditions; `cond1` is checked against `candidate`
/// blocks when given and reported [`Condition::Unknown`] otherwise.
pub fn markov_support_conditions(
    rho: &QuantumHiddenMarkov,
    sigma: &QuantumHiddenMarkov,
    candidate: Option<&[Projection]>,
) -> Result<MarkovSupportReport> {
    check_markov_pair(rho, sigma)?;
    let k = rho.alphabet_len();
    let mut cond2 = true;
    let mut cond3 = true;
    for x in 0..k {
        for y in 0..k {
            let t = rho.chain().t(x, y);
            let s = sigma.chain().t(x, y);
            if s == 0.0 && t != 0.0 {
                cond2 = false;
            }
            if t > 0.0 {
                let theta = rho.site_state(x, y).expect("validated");
                cond3 &= match sigma.site_state(x, y) {
                    Some(phi) => projection_le(&theta.support_projection()?, &phi.support_projection()?)?,
                    None => false,
                };
            }
        }
    }
    let cond1 = match candidate {
        None => Condition::Unknown,
        Some(blocks) => {
            if check_block_condition(rho, sigma, blocks)? {
                Condition::Holds
            } else {
                Condition::Fails
            }
        }
    };
    Ok(MarkovSupportReport { cond1, cond2, cond3 })
}

fn check_block_condition(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov, blocks: &[Projection]) -> Result<bool> {
    let k = rho.alphabet_len();
    if blocks.len() != k {
        return Err(Error::InvalidArgument(format!("expected {k} block projections, got {}", blocks.len())));
    }
    for (x, p) in blocks.iter().enumerate() {
        if p.dim() != rho.site_dim() {
            return Err(Error::DimensionMismatch { left: rho.site_dim(), right: p.dim() });
        }
        if p.rank() == 0 {
            return Ok(false);
        }
        for q in &blocks[x + 1..] {
            if !projections_orthogonal(p, q)? {
                return Ok(false);
            }
        }
    }
    for x in 0..k {
        for y in 0..k {
            let theta = rho.site_state(x, y).map(DensityOperator::support_projection).transpose()?;
            let phi = sigma.site_state(x, y).map(DensityOperator::support_projection).transpose()?;
            for s in theta.iter().chain(phi.iter()) {
                if !projection_le(s, &blocks[x])? {
                    return Ok(false);
                }
            }
            if let (Some(a), Some(b)) = (&theta, &phi) {
                if !projections_intersect(a, b)? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Smallest candidate blocks: `P_x` = join of all site supports emitted from `x`.
///
/// Returns `None` when these joins are not mutually orthogonal, in which case
/// no block family satisfies the first support condition.
pub fn minimal_block_projections(rho: &QuantumHiddenMarkov, sigma: &QuantumHiddenMarkov) -> Result<Option<Vec<Projection>>> {
    check_markov_pair(rho, sigma)?;
    let k = rho.alphabet_len();
    let d = rho.site_dim();
    let mut blocks = Vec::with_capacity(k);
    for x in 0..k {
        let mut acc = HermitianOperator::zeros(d);
        for y in 0..k {
            for s in [rho.site_state(x, y), sigma.site_state(x, y)].into_iter().flatten() {
                acc = acc.add(s.support_projection()?.operator())?;
            }
        }
        blocks.push(psd_decompose(&acc)?.support_projection());
    }
    for x in 0..k {
        for y in x + 1..k {
            if !projections_orthogonal(&blocks[x], &blocks[y])? {
                return Ok(None);
            }
        }
    }
    Ok(Some(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::partial_trace_last;
    use crate::random::{random_density, random_stochastic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn flip_chain(t: f64) -> MarkovChain {
        MarkovChain::new(vec![vec![1.0 - t, t], vec![t, 1.0 - t]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn iid_restriction_is_tensor_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho1 = random_density(&mut rng, 2, 2);
        let model = StateFamily::Iid(rho1.clone());
        let rho3 = model.restrict(3).unwrap();
        let expected = rho1.operator().kron(rho1.operator()).unwrap().kron(rho1.operator()).unwrap();
        assert!(rho3.operator().max_abs_diff(&expected) < 1e-15);
        assert!((rho3.operator().trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_markov_two_sites() {
        let t = 0.2;
        let model = StateFamily::ClassicalMarkov(flip_chain(t));
        let rho2 = model.restrict(2).unwrap();
        let expected = HermitianOperator::diagonal(&[0.5 * (1.0 - t), 0.5 * t, 0.5 * t, 0.5 * (1.0 - t)]);
        assert!(rho2.operator().max_abs_diff(&expected) < 1e-15);
        // the hidden Markov embedding agrees
        let qhm = StateFamily::QuantumHiddenMarkov(QuantumHiddenMarkov::classical(flip_chain(t)));
        assert!(qhm.restrict(3).unwrap().operator().max_abs_diff(model.restrict(3).unwrap().operator()) < 1e-15);
    }

    #[test]
    fn classical_markov_diagonal_matches_word_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chain = MarkovChain::from_transition(random_stochastic(&mut rng, 3)).unwrap();
        let model = StateFamily::ClassicalMarkov(chain.clone());
        let rho = model.restrict(3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    let idx = a * 9 + b * 3 + d;
                    let p = chain.word_probability(&[a, b, d]);
                    assert!((rho.operator().entry(idx, idx).re - p).abs() < 1e-15);
                }
            }
        }
    }

    fn random_qhm(rng: &mut ChaCha8Rng) -> QuantumHiddenMarkov {
        let chain = MarkovChain::from_transition(random_stochastic(rng, 2)).unwrap();
        let states = (0..2).map(|_| (0..2).map(|_| Some(random_density(rng, 2, 2))).collect()).collect();
        QuantumHiddenMarkov::new(chain, states).unwrap()
    }

    #[test]
    fn hidden_markov_is_normalized_psd_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = StateFamily::QuantumHiddenMarkov(random_qhm(&mut rng));
        let rho4 = model.restrict(4).unwrap();
        assert!((rho4.operator().trace() - 1.0).abs() < 1e-10);
        assert!(rho4.operator().min_eigenvalue().unwrap() > -1e-10);
        let rho3 = model.restrict(3).unwrap();
        let traced = partial_trace_last(rho4.operator(), 2).unwrap();
        assert!(traced.max_abs_diff(rho3.operator()) < 1e-9);
        let rho1 = model.restrict(1).unwrap();
        assert!(partial_trace_last(model.restrict(2).unwrap().operator(), 2).unwrap().max_abs_diff(rho1.operator()) < 1e-12);
    }

    #[test]
    fn missing_site_state_is_rejected() {
        let chain = flip_chain(0.3);
        let mut states: Vec<Vec<Option<DensityOperator>>> =
            (0..2).map(|_| (0..2).map(|_| Some(DensityOperator::maximally_mixed(2))).collect()).collect();
        states[1][0] = None;
        assert!(matches!(QuantumHiddenMarkov::new(chain, states), Err(Error::MissingSiteState { x: 1, y: 0 })));
    }

    #[test]
    fn invalid_chains_are_named() {
        let err = MarkovChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap_err();
        assert!(err.to_string().contains("row sums"));
        let err = MarkovChain::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap_err();
        assert!(err.to_string().contains("stationarity"));
    }

    #[test]
    fn local_gibbs_single_site_terms_give_products() {
        let h = HermitianOperator::diagonal(&[0.0, 1.3]);
        let model = StateFamily::LocalGibbs(LocalGibbs::new(2, 1, h.clone()).unwrap());
        let w = [1.0, (-1.3f64).exp()];
        let z = w[0] + w[1];
        let one = DensityOperator::diagonal(&[w[0] / z, w[1] / z]).unwrap();
        let iid = StateFamily::Iid(one).restrict(3).unwrap();
        assert!(model.restrict(3).unwrap().operator().max_abs_diff(iid.operator()) < 1e-14);
    }

    #[test]
    fn local_gibbs_two_site_interaction_is_a_density() {
        let zz = HermitianOperator::diagonal(&[0.7, -0.7, -0.7, 0.7]);
        let x = HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let xx = x.kron(&HermitianOperator::identity(2)).unwrap().scaled(0.4);
        let model = StateFamily::LocalGibbs(LocalGibbs::new(2, 2, zz.add(&xx).unwrap()).unwrap());
        let rho = model.restrict(4).unwrap();
        assert!((rho.operator().trace() - 1.0).abs() < 1e-12);
        assert!(rho.operator().min_eigenvalue().unwrap() > 0.0);
        // n < range: no terms fit, maximally mixed
        let rho1 = model.restrict(1).unwrap();
        assert!(rho1.operator().max_abs_diff(DensityOperator::maximally_mixed(2).operator()) < 1e-15);
    }

    #[test]
    fn explicit_family_bounds() {
        let m = StateFamily::explicit(vec![DensityOperator::maximally_mixed(2), DensityOperator::maximally_mixed(4)]).unwrap();
        assert!(m.restrict(2).is_ok());
        assert!(matches!(m.restrict(3), Err(Error::IndexOutOfRange { requested: 3, available: 2 })));
        assert!(StateFamily::explicit(vec![DensityOperator::maximally_mixed(2), DensityOperator::maximally_mixed(3)]).is_err());
    }

    #[test]
    fn size_cap_is_enforced() {
        let model = StateFamily::Iid(DensityOperator::maximally_mixed(2));
        assert!(matches!(restrict_capped(&model, 5, 16), Err(Error::SizeOverflow { cap: 16, .. })));
    }

    #[test]
    fn cache_returns_same_value_once() {
        let cache = RestrictionCache::default();
        let model = StateFamily::ClassicalMarkov(flip_chain(0.1));
        let a = cache.get(&model, 3).unwrap();
        let b = cache.get(&model, 3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        let other = StateFamily::ClassicalMarkov(flip_chain(0.2));
        assert_ne!(model.content_hash(), other.content_hash());
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    let v = cache.get(&other, 4).unwrap();
                    assert!((v.operator().trace() - 1.0).abs() < 1e-12);
                });
            }
        });
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn support_relation_examples() {
        let half = DensityOperator::maximally_mixed(2);
        let zero = DensityOperator::basis(2, 0);
        let one = DensityOperator::basis(2, 1);
        assert_eq!(support_relation(&half, &half).unwrap(), SupportRelation::Equal);
        assert_eq!(support_relation(&zero, &half).unwrap(), SupportRelation::LeftDominates);
        assert_eq!(support_relation(&half, &zero).unwrap(), SupportRelation::RightDominates);
        assert_eq!(support_relation(&zero, &one).unwrap(), SupportRelation::Orthogonal);
        let plus = DensityOperator::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(support_relation(&zero, &plus).unwrap(), SupportRelation::Incomparable);
    }

    #[test]
    fn markov_conditions_classical() {
        let a = QuantumHiddenMarkov::classical(flip_chain(0.2));
        let b = QuantumHiddenMarkov::classical(flip_chain(0.4));
        let rep = markov_support_conditions(&a, &b, None).unwrap();
        assert!(rep.cond2 && rep.cond3);
        assert_eq!(rep.cond1, Condition::Unknown);
        let blocks = minimal_block_projections(&a, &b).unwrap().unwrap();
        let rep = markov_support_conditions(&a, &b, Some(&blocks)).unwrap();
        assert_eq!(rep.cond1, Condition::Holds);

        // T has a zero where S is positive: still absolutely continuous
        let z = QuantumHiddenMarkov::classical(MarkovChain::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap_or_else(|_| {
            MarkovChain::from_transition(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap()
        }));
        let rep = markov_support_conditions(&z, &b, None).unwrap();
        assert!(rep.cond2);
        // and conversely S has a zero where T is positive
        let rep = markov_support_conditions(&b, &z, None).unwrap();
        assert!(!rep.cond2);
    }

    #[test]
    fn markov_conditions_with_quantum_blocks() {
        // site C^3 = span{e0,e1} ⊕ span{e2}; θ_xy = φ_xy living in block x
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let embed = |d: &DensityOperator| {
            let mut m = vec![vec![c(0.0, 0.0); 3]; 3];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = d.operator().entry(i, j);
                }
            }
            DensityOperator::new(HermitianOperator::from_fn(3, |i, j| m[i][j]).unwrap()).unwrap()
        };
        let states: Vec<Vec<Option<DensityOperator>>> = vec![
            vec![Some(embed(&random_density(&mut rng, 2, 2))), Some(embed(&random_density(&mut rng, 2, 2)))],
            vec![Some(DensityOperator::basis(3, 2)), Some(DensityOperator::basis(3, 2))],
        ];
        let chain = MarkovChain::from_transition(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let a = QuantumHiddenMarkov::new(chain.clone(), states.clone()).unwrap();
        let b = QuantumHiddenMarkov::new(MarkovChain::from_transition(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap(), states).unwrap();
        let blocks = vec![
            Projection::new(HermitianOperator::diagonal(&[1.0, 1.0, 0.0])).unwrap(),
            Projection::new(HermitianOperator::diagonal(&[0.0, 0.0, 1.0])).unwrap(),
        ];
        let rep = markov_support_conditions(&a, &b, Some(&blocks)).unwrap();
        assert_eq!(rep, MarkovSupportReport { cond1: Condition::Holds, cond2: true, cond3: true });
        // overlapping candidate blocks fail
        let bad = vec![
            Projection::new(HermitianOperator::diagonal(&[1.0, 1.0, 0.0])).unwrap(),
            Projection::new(HermitianOperator::diagonal(&[0.0, 1.0, 1.0])).unwrap(),
        ];
        assert_eq!(markov_support_conditions(&a, &b, Some(&bad)).unwrap().cond1, Condition::Fails);
    }
}
