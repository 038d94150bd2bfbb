//! TOML run configuration. Everything is validated before any computation.

use std::path::Path;

use quantum_exponents::operator::HermitianOperator;
use quantum_exponents::state::{DensityOperator, LocalGibbs, MarkovChain, QuantumHiddenMarkov, StateFamily};
use quantum_exponents::Error;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rho: Option<ModelSpec>,
    pub sigma: Option<ModelSpec>,
    #[serde(default)]
    pub exponents: ExponentsSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub classical: Option<ClassicalSection>,
    #[serde(default)]
    pub verify: VerifySection,
    pub size_cap: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub s_grid: Option<usize>,
    pub a_values: Option<Vec<f64>>,
    pub r_values: Option<Vec<f64>>,
    pub sandwich_block: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Thresholds in nats per site; the midpoint of the exponent interval when empty.
    #[serde(default)]
    pub a_values: Vec<f64>,
    #[serde(default)]
    pub n_list: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub a_values: Vec<f64>,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_pairs() -> usize {
    20
}

fn default_max_dim() -> usize {
    3
}

fn default_n_max() -> usize {
    4
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { pairs: default_pairs(), max_dim: default_max_dim(), n_max: default_n_max() }
    }
}

/// A matrix entry: a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> quantum_exponents::operator::Complex {
        match self {
            Entry::Real(re) => quantum_exponents::operator::Complex::new(re, 0.0),
            Entry::Complex([re, im]) => quantum_exponents::operator::Complex::new(re, im),
        }
    }
}

/// One of `matrix`, `diagonal` or `pure`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub matrix: Option<Vec<Vec<Entry>>>,
    pub diagonal: Option<Vec<f64>>,
    pub pure: Option<Vec<Entry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emission {
    pub x: usize,
    pub y: usize,
    pub state: DensitySpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Iid {
        state: DensitySpec,
    },
    ClassicalMarkov {
        transition: Vec<Vec<f64>>,
        stationary: Option<Vec<f64>>,
    },
    HiddenMarkov {
        transition: Vec<Vec<f64>>,
        stationary: Option<Vec<f64>>,
        emissions: Vec<Emission>,
    },
    LocalGibbs {
        site_dim: usize,
        range: usize,
        local_term: Vec<Vec<Entry>>,
    },
    Explicit {
        states: Vec<DensitySpec>,
    },
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(n) = cfg.exponents.s_grid {
        if n < 3 {
            return Err(CliError::Config("exponents.s_grid: need at least 3 points".into()));
        }
    }
    if cfg.sweep.n_list.contains(&0) {
        return Err(CliError::Config("sweep.n_list: site counts must be positive".into()));
    }
    if let Some(c) = &cfg.classical {
        if c.n_list.contains(&0) {
            return Err(CliError::Config("classical.n_list: site counts must be positive".into()));
        }
    }
    // build once so invalid models are reported at load time
    if let Some(m) = &cfg.rho {
        build_model(m).map_err(|e| field_error("rho", e))?;
    }
    if let Some(m) = &cfg.sigma {
        build_model(m).map_err(|e| field_error("sigma", e))?;
    }
    Ok(cfg)
}

fn field_error(field: &str, e: Error) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

impl RunConfig {
    /// Both models, or a configuration error naming the missing one.
    pub fn models(&self) -> Result<(StateFamily, StateFamily), CliError> {
        let rho = self.rho.as_ref().ok_or_else(|| CliError::Config("missing [rho] model".into()))?;
        let sigma = self.sigma.as_ref().ok_or_else(|| CliError::Config("missing [sigma] model".into()))?;
        let rho = build_model(rho).map_err(|e| field_error("rho", e))?;
        let sigma = build_model(sigma).map_err(|e| field_error("sigma", e))?;
        if rho.site_dim() != sigma.site_dim() {
            return Err(CliError::Config(format!(
                "site dimensions differ: rho has {}, sigma has {}",
                rho.site_dim(),
                sigma.site_dim()
            )));
        }
        Ok((rho, sigma))
    }
}

fn matrix(rows: &[Vec<Entry>]) -> Result<HermitianOperator, Error> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidModel("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { left: n, right: bad.len() });
    }
    HermitianOperator::from_fn(n, |i, j| rows[i][j].value())
}

fn density(spec: &DensitySpec) -> Result<DensityOperator, Error> {
    match (&spec.matrix, &spec.diagonal, &spec.pure) {
        (Some(m), None, None) => DensityOperator::new(matrix(m)?),
        (None, Some(d), None) => DensityOperator::diagonal(d),
        (None, None, Some(v)) => DensityOperator::pure(&v.iter().map(|e| e.value()).collect::<Vec<_>>()),
        _ => Err(Error::InvalidModel("a state needs exactly one of `matrix`, `diagonal` or `pure`".into())),
    }
}

fn chain(transition: &[Vec<f64>], stationary: &Option<Vec<f64>>) -> Result<MarkovChain, Error> {
    match stationary {
        Some(r) => MarkovChain::new(transition.to_vec(), r.clone()),
        None => MarkovChain::from_transition(transition.to_vec()),
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<StateFamily, Error> {
    Ok(match spec {
        ModelSpec::Iid { state } => StateFamily::Iid(density(state)?),
        ModelSpec::ClassicalMarkov { transition, stationary } => StateFamily::ClassicalMarkov(chain(transition, stationary)?),
        ModelSpec::HiddenMarkov { transition, stationary, emissions } => {
            let c = chain(transition, stationary)?;
            let k = c.len();
            let mut states: Vec<Vec<Option<DensityOperator>>> = vec![vec![None; k]; k];
            for e in emissions {
                if e.x >= k || e.y >= k {
                    return Err(Error::InvalidModel(format!("emission ({}, {}) outside the alphabet of size {k}", e.x, e.y)));
                }
                if states[e.x][e.y].is_some() {
                    return Err(Error::InvalidModel(format!("emission ({}, {}) given twice", e.x, e.y)));
                }
                states[e.x][e.y] = Some(density(&e.state)?);
            }
            StateFamily::QuantumHiddenMarkov(QuantumHiddenMarkov::new(c, states)?)
        }
        ModelSpec::LocalGibbs { site_dim, range, local_term } => {
            StateFamily::LocalGibbs(LocalGibbs::new(*site_dim, *range, matrix(local_term)?)?)
        }
        ModelSpec::Explicit { states } => StateFamily::explicit(states.iter().map(density).collect::<Result<_, _>>()?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_complex_entries() {
        let cfg = parse(
            r#"
            [rho]
            kind = "iid"
            state = { matrix = [[0.5, [0.0, 0.5]], [[0.0, -0.5], 0.5]] }
            [sigma]
            kind = "iid"
            state = { diagonal = [0.5, 0.5] }
            "#,
        )
        .unwrap();
        let (rho, _) = cfg.models().unwrap();
        assert_eq!(rho.site_dim(), 2);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = parse("[rho]\nkind = \"iid\"\nstate = { diagonal = [1.0] }\ncolour = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("colour")));
        let err = parse("bogus = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("bogus")));
    }

    #[test]
    fn names_row_sum_failures() {
        let err = parse("[rho]\nkind = \"classical_markov\"\ntransition = [[0.5, 0.6], [0.5, 0.5]]\n").unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("rho") && m.contains("row sums")));
    }

    #[test]
    fn hidden_markov_requires_emissions() {
        let err = parse(
            r#"
            [rho]
            kind = "hidden_markov"
            transition = [[0.5, 0.5], [0.5, 0.5]]
            emissions = [{ x = 0, y = 0, state = { diagonal = [1.0, 0.0] } }]
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }
}
