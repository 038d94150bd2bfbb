//! The four verbs. Each returns the full output text so writing is a single step.

use quantum_exponents::classical::{min_sum_bound, moment_identity, nussbaum_szkola, product_error_exact};
use quantum_exponents::discrimination::{audenaert_bound, bayes_optimal_test, combined_error, exponent_sweep_with, SweepOptions};
use quantum_exponents::exponents::{
    exponent_report, hat_phi, hoeffding_solve, legendre_phi, psi_limit, psi_limit_with, unit_grid, PsiOptions, PsiProfile,
    DEFAULT_GRID_POINTS,
};
use quantum_exponents::factorization::{markov_factorization_constants, psi_sandwich};
use quantum_exponents::operator::DEFAULT_SIZE_CAP;
use quantum_exponents::random::random_density;
use quantum_exponents::state::{restrict, DensityOperator, MarkovChain, StateFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{cell, json, Num, Table};
use crate::{CliError, Format};

/// Flags that override the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub size_cap: Option<usize>,
    pub s_grid: Option<usize>,
}

fn compute<T>(r: quantum_exponents::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Compute(e.to_string()))
}

fn size_cap(cfg: &RunConfig, o: &Overrides) -> usize {
    o.size_cap.or(cfg.size_cap).unwrap_or(DEFAULT_SIZE_CAP)
}

fn profile(cfg: &RunConfig, o: &Overrides) -> Result<(StateFamily, StateFamily, PsiProfile), CliError> {
    let (rho, sigma) = cfg.models()?;
    let points = o.s_grid.or(cfg.exponents.s_grid).unwrap_or(DEFAULT_GRID_POINTS);
    if points < 3 {
        return Err(CliError::Config("--s-grid: need at least 3 points".into()));
    }
    let opts = PsiOptions { grid: unit_grid(points), sandwich_block: cfg.exponents.sandwich_block, size_cap: size_cap(cfg, o) };
    let p = compute(psi_limit_with(&rho, &sigma, &opts))?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok((rho, sigma, p))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Serialize)]
struct PsiPoint {
    s: Num,
    psi: Num,
}

#[derive(Serialize)]
struct PhiPoint {
    a: Num,
    phi: Num,
    hat_phi: Num,
}

#[derive(Serialize)]
struct HoeffdingRow {
    r: Num,
    a_r: Num,
    s_r: Num,
    b_r: Num,
    exponent: Num,
}

#[derive(Serialize)]
struct SteinOut {
    psi_at_1: Num,
    exponent: Num,
    mean_relative_entropy: Num,
}

#[derive(Serialize)]
struct ExponentsOut {
    units: &'static str,
    method: quantum_exponents::exponents::PsiMethod,
    warnings: Vec<String>,
    chernoff: Num,
    chernoff_s: Num,
    interval: [Num; 2],
    psi_at_0: Num,
    psi_at_1: Num,
    band: Num,
    stein: SteinOut,
    psi: Vec<PsiPoint>,
    phi: Vec<PhiPoint>,
    hoeffding: Vec<HoeffdingRow>,
}

pub fn exponents(cfg: &RunConfig, o: &Overrides, format: Format) -> Result<String, CliError> {
    let (_, _, p) = profile(cfg, o)?;
    let rep = exponent_report(&p);
    let (d0, d1) = rep.interval;
    let a_values = cfg.exponents.a_values.clone().unwrap_or_else(|| {
        let lo = if d0.is_finite() { d0 - 1.0 } else { -5.0 };
        let hi = if d1.is_finite() { d1 + 1.0 } else { 5.0 };
        linspace(lo, hi, 41)
    });
    let r_values = cfg.exponents.r_values.clone().unwrap_or_else(|| {
        let start = -rep.psi_at_1;
        linspace(start, start + 2.0, 21)
    });
    let psi: Vec<PsiPoint> = p.grid().iter().zip(p.values()).map(|(&s, &v)| PsiPoint { s: Num(s), psi: Num(v) }).collect();
    let phi: Vec<PhiPoint> = a_values
        .iter()
        .map(|&a| {
            let v = legendre_phi(&p, a);
            PhiPoint { a: Num(a), phi: Num(v), hat_phi: Num(v - a) }
        })
        .collect();
    let hoeffding: Vec<HoeffdingRow> = r_values
        .iter()
        .map(|&r| {
            let h = hoeffding_solve(&p, r);
            HoeffdingRow { r: Num(r), a_r: Num(h.a_r), s_r: Num(h.s_r), b_r: Num(h.b_r), exponent: Num(h.exponent) }
        })
        .collect();
    match format {
        Format::Json => json(&ExponentsOut {
            units: "nats per site",
            method: rep.method,
            warnings: rep.warnings,
            chernoff: Num(rep.chernoff),
            chernoff_s: Num(rep.chernoff_s),
            interval: [Num(d0), Num(d1)],
            psi_at_0: Num(rep.psi_at_0),
            psi_at_1: Num(rep.psi_at_1),
            band: Num(rep.band),
            stein: SteinOut {
                psi_at_1: Num(rep.stein.psi_at_1),
                exponent: Num(rep.stein.exponent),
                mean_relative_entropy: Num(rep.stein.mean_relative_entropy),
            },
            psi,
            phi,
            hoeffding,
        }),
        Format::Csv => {
            let mut t = Table::new(&["quantity", "x", "value"]);
            let scalar = |t: &mut Table, name: &str, v: f64| -> Result<(), CliError> {
                t.row(&[name.to_string(), String::new(), cell(v)?]);
                Ok(())
            };
            scalar(&mut t, "chernoff", rep.chernoff)?;
            scalar(&mut t, "chernoff_s", rep.chernoff_s)?;
            scalar(&mut t, "interval_left", d0)?;
            scalar(&mut t, "interval_right", d1)?;
            scalar(&mut t, "psi_at_0", rep.psi_at_0)?;
            scalar(&mut t, "psi_at_1", rep.psi_at_1)?;
            scalar(&mut t, "band", rep.band)?;
            scalar(&mut t, "stein_exponent", rep.stein.exponent)?;
            for q in &psi {
                t.row(&["psi".into(), cell(q.s.0)?, cell(q.psi.0)?]);
            }
            for q in &phi {
                t.row(&["phi".into(), cell(q.a.0)?, cell(q.phi.0)?]);
                t.row(&["hat_phi".into(), cell(q.a.0)?, cell(q.hat_phi.0)?]);
            }
            for h in &hoeffding {
                for (name, v) in [("hoeffding_a_r", h.a_r), ("hoeffding_s_r", h.s_r), ("hoeffding_b_r", h.b_r), ("hoeffding_exponent", h.exponent)] {
                    t.row(&[name.into(), cell(h.r.0)?, cell(v.0)?]);
                }
            }
            Ok(t.finish())
        }
    }
}

#[derive(Serialize)]
struct SweepOut {
    n: usize,
    a: Num,
    slope_alpha: Num,
    slope_beta: Num,
    pred_alpha: Num,
    pred_beta: Num,
    gap_alpha: Num,
    gap_beta: Num,
}

pub const SWEEP_HEADER: [&str; 8] = ["n", "a", "slope_alpha", "slope_beta", "pred_alpha", "pred_beta", "gap_alpha", "gap_beta"];

pub fn sweep(cfg: &RunConfig, o: &Overrides, format: Format) -> Result<String, CliError> {
    if cfg.sweep.n_list.is_empty() {
        return Err(CliError::Config("sweep.n_list: at least one site count is required".into()));
    }
    let (rho, sigma, p) = profile(cfg, o)?;
    let mut a_values = cfg.sweep.a_values.clone();
    if a_values.is_empty() {
        let (d0, d1) = p.interval();
        if !(d0.is_finite() && d1.is_finite()) {
            return Err(CliError::Config("sweep.a_values: required when the exponent interval is unbounded".into()));
        }
        a_values.push(0.5 * (d0 + d1));
    }
    if let Some(a) = a_values.iter().find(|a| !a.is_finite()) {
        return Err(CliError::Config(format!("sweep.a_values: {a} is not finite")));
    }
    a_values.sort_by(f64::total_cmp);
    a_values.dedup();
    let opts = SweepOptions { size_cap: size_cap(cfg, o), ..SweepOptions::default() };
    let mut rows = Vec::new();
    for a in a_values {
        rows.extend(compute(exponent_sweep_with(&rho, &sigma, &p, a, &cfg.sweep.n_list, &opts))?);
    }
    match format {
        Format::Csv => {
            let mut t = Table::new(&SWEEP_HEADER);
            for r in &rows {
                t.row(&[
                    r.n.to_string(),
                    cell(r.a)?,
                    cell(r.slope_alpha)?,
                    cell(r.slope_beta)?,
                    cell(r.pred_alpha)?,
                    cell(r.pred_beta)?,
                    cell(r.gap_alpha)?,
                    cell(r.gap_beta)?,
                ]);
            }
            Ok(t.finish())
        }
        Format::Json => json(
            &rows
                .iter()
                .map(|r| SweepOut {
                    n: r.n,
                    a: Num(r.a),
                    slope_alpha: Num(r.slope_alpha),
                    slope_beta: Num(r.slope_beta),
                    pred_alpha: Num(r.pred_alpha),
                    pred_beta: Num(r.pred_beta),
                    gap_alpha: Num(r.gap_alpha),
                    gap_beta: Num(r.gap_beta),
                })
                .collect::<Vec<_>>(),
        ),
    }
}

#[derive(Serialize)]
struct ClassicalOut {
    n: usize,
    a: Num,
    log_alpha: Num,
    log_beta: Num,
    slope_alpha: Num,
    slope_beta: Num,
}

pub fn classical(cfg: &RunConfig, format: Format) -> Result<String, CliError> {
    let c = cfg.classical.as_ref().ok_or_else(|| CliError::Config("missing [classical] section".into()))?;
    let mut a_values = c.a_values.clone();
    if let Some(a) = a_values.iter().find(|a| !a.is_finite()) {
        return Err(CliError::Config(format!("classical.a_values: {a} is not finite")));
    }
    a_values.sort_by(f64::total_cmp);
    a_values.dedup();
    let mut ns = c.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::new();
    for &a in &a_values {
        for &n in &ns {
            let e = product_error_exact(&c.p, &c.q, a, n).map_err(|e| match e {
                quantum_exponents::Error::NotNormalized { .. }
                | quantum_exponents::Error::DimensionMismatch { .. }
                | quantum_exponents::Error::InvalidArgument(_) => CliError::Config(format!("classical: {e}")),
                other => CliError::Compute(other.to_string()),
            })?;
            rows.push(ClassicalOut {
                n,
                a: Num(a),
                log_alpha: Num(e.log_alpha),
                log_beta: Num(e.log_beta),
                slope_alpha: Num(e.alpha_slope(n)),
                slope_beta: Num(e.beta_slope(n)),
            });
        }
    }
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Table::new(&["n", "a", "log_alpha", "log_beta", "slope_alpha", "slope_beta"]);
            for r in &rows {
                t.row(&[r.n.to_string(), cell(r.a.0)?, cell(r.log_alpha.0)?, cell(r.log_beta.0)?, cell(r.slope_alpha.0)?, cell(r.slope_beta.0)?]);
            }
            Ok(t.finish())
        }
    }
}

#[derive(Serialize)]
pub struct Check {
    pub check: String,
    pub passed: bool,
    pub measured: Num,
    pub tolerance: Num,
}

fn at_most(name: &str, measured: f64, tolerance: f64) -> Check {
    Check { check: name.into(), passed: measured <= tolerance, measured: Num(measured), tolerance: Num(tolerance) }
}

fn at_least(name: &str, measured: f64, tolerance: f64) -> Check {
    Check { check: name.into(), passed: measured >= tolerance, measured: Num(measured), tolerance: Num(tolerance) }
}

fn duality_chain(name: &str, p: &PsiProfile) -> Vec<Check> {
    let start = -p.psi_at_1() + 1e-3;
    let (mut wb, mut wr) = (0.0f64, 0.0f64);
    for k in 0..25 {
        let r = start + 2.0 * k as f64 / 24.0;
        let h = hoeffding_solve(p, r);
        wb = wb.max((h.b_r - legendre_phi(p, h.a_r)).abs());
        wr = wr.max((hat_phi(p, h.a_r) - r).abs());
    }
    vec![at_most(&format!("{name}_hoeffding_b_equals_phi"), wb, 1e-8), at_most(&format!("{name}_hat_phi_inverse"), wr, 1e-10)]
}

/// Run the invariant suite; returns the checks and whether all passed.
pub fn verify(cfg: &RunConfig, o: &Overrides) -> Result<Vec<Check>, CliError> {
    let seed = o.seed.or(cfg.seed).unwrap_or(0);
    let v = &cfg.verify;
    if v.max_dim < 2 {
        return Err(CliError::Config("verify.max_dim: must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<(DensityOperator, DensityOperator)> = (0..v.pairs)
        .map(|_| {
            let d = rng.gen_range(2..=v.max_dim);
            let (r1, r2) = (rng.gen_range(1..=d), rng.gen_range(1..=d));
            (random_density(&mut rng, d, r1), random_density(&mut rng, d, r2))
        })
        .collect();
    let (mut moment, mut aud, mut minsum, mut bayes) = (0.0f64, f64::INFINITY, f64::INFINITY, 0.0f64);
    for (rho, sigma) in &corpus {
        let pair = compute(nussbaum_szkola(rho, sigma))?;
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let m = compute(moment_identity(&pair, rho, sigma, s))?;
            moment = moment.max(m.gap / (1.0 + m.quantum));
            for pi in [0.25, 0.5, 0.75] {
                let c = compute(audenaert_bound(rho, sigma, pi, s))?;
                aud = aud.min(c.rhs - c.lhs);
            }
        }
        let (mr, ms) = (StateFamily::Iid(rho.clone()), StateFamily::Iid(sigma.clone()));
        for n in 1..=v.n_max {
            if rho.dim().checked_pow(n as u32).is_none_or(|d| d > 256) {
                break;
            }
            let (rn, sn) = (compute(restrict(&mr, n))?, compute(restrict(&ms, n))?);
            let pn = compute(nussbaum_szkola(&rn, &sn))?;
            for a in [-1.0, 0.0, 1.0] {
                let e = compute(combined_error(&rn, &sn, a, n))?;
                minsum = minsum.min(e - min_sum_bound(&pn, a, n, e).lower);
                let w = (-(n as f64) * a).exp();
                let b = compute(bayes_optimal_test(&rn, &sn, w / (1.0 + w)))?.min_error;
                bayes = bayes.max((e - (1.0 + w) * b).abs() / (1.0 + e));
            }
        }
    }
    let mut checks = vec![
        at_most("moment_identity", moment, 1e-10),
        at_least("audenaert_slack", aud, -1e-12),
        at_least("min_sum_slack", minsum, -1e-12),
        at_most("combined_error_bayes_identity", bayes, 1e-10),
    ];

    let grid = unit_grid(257);
    let bern = compute(psi_limit(
        &StateFamily::Iid(compute(DensityOperator::diagonal(&[0.5, 0.5]))?),
        &StateFamily::Iid(compute(DensityOperator::diagonal(&[0.9, 0.1]))?),
        &grid,
    ))?;
    checks.extend(duality_chain("bernoulli", &bern));

    let chain = |t: [[f64; 2]; 2]| compute(MarkovChain::from_transition(t.iter().map(|r| r.to_vec()).collect()));
    let (ca, cb) = (chain([[0.7, 0.3], [0.4, 0.6]])?, chain([[0.5, 0.5], [0.2, 0.8]])?);
    let eta = [markov_factorization_constants(&ca), markov_factorization_constants(&cb)]
        .into_iter()
        .fold(1.0f64, |m, (u, l)| m.max(u).max(l));
    let (a, b) = (StateFamily::ClassicalMarkov(ca), StateFamily::ClassicalMarkov(cb));
    let exact = compute(psi_limit(&a, &b, &grid))?;
    checks.extend(duality_chain("markov", &exact));
    let mut excess = f64::NEG_INFINITY;
    for m in [2, 4] {
        let band = compute(psi_sandwich(&a, &b, m, eta, &grid))?;
        for (k, &s) in grid.iter().enumerate() {
            excess = excess.max((band.values()[k] - exact.psi(s)).abs() - band.sandwich_width());
        }
    }
    checks.push(at_most("sandwich_contains_limit", excess, 1e-12));

    if cfg.rho.is_some() || cfg.sigma.is_some() {
        let (_, _, p) = profile(cfg, o)?;
        let worst_second = p
            .grid()
            .windows(3)
            .zip(p.values().windows(3))
            .map(|(s, v)| {
                let (h1, h2) = (s[1] - s[0], s[2] - s[1]);
                ((v[2] - v[1]) / h2 - (v[1] - v[0]) / h1) * 0.5 * (h1 + h2)
            })
            .fold(f64::INFINITY, f64::min);
        checks.push(at_least("config_psi_convexity", worst_second, -1e-9));
        let max_psi = p.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        checks.push(at_most("config_psi_nonpositive", max_psi - p.sandwich_width(), 1e-12));
        checks.extend(duality_chain("config", &p));
    }
    Ok(checks)
}

pub fn verify_output(checks: &[Check], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut out = String::new();
            for c in checks {
                out.push_str(&serde_json::to_string(c).map_err(|e| CliError::Compute(e.to_string()))?);
                out.push('\n');
            }
            Ok(out)
        }
        Format::Csv => {
            let mut t = Table::new(&["check", "passed", "measured", "tolerance"]);
            for c in checks {
                t.row(&[c.check.clone(), c.passed.to_string(), cell(c.measured.0)?, cell(c.tolerance.0)?]);
            }
            Ok(t.finish())
        }
    }
}
