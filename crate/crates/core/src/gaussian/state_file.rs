//! TOML state specification files.
//!
//! A single pure state:
//!
//! ```toml
//! sigma = [inf, 1, 1]
//! correlations = [{ pair = [1, 2], sigma_c = 0 }]
//! ```
//!
//! or a mixture, where each entry carries its own state and an optional
//! position offset per particle:
//!
//! ```toml
//! [[mixture]]
//! weight = 0.5
//! state = { sigma = [inf, 1, 1], correlations = [{ pair = [1, 2], sigma_c = 0 }] }
//!
//! [[mixture]]
//! weight = 0.5
//! mean = [0, 0, 0]
//! state = { sigma = [inf, 1, 1], correlations = [{ pair = [1, 3], sigma_c = 0 }] }
//! ```
//!
//! Particles are numbered 1 to 3. `inf` is TOML's infinity literal.

use std::path::Path;

use serde::Deserialize;

use super::form::{Correlation, WidthSpec};
use super::mixture::{GaussianMixture, MixtureComponent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl From<Number> for f64 {
    fn from(n: Number) -> f64 {
        match n {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationEntry {
    pair: [usize; 2],
    sigma_c: Number,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    sigma: [Number; 3],
    #[serde(default)]
    correlations: Vec<CorrelationEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureEntry {
    weight: Number,
    #[serde(default)]
    mean: Option<[Number; 3]>,
    state: StateEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    sigma: Option<[Number; 3]>,
    #[serde(default)]
    correlations: Vec<CorrelationEntry>,
    mixture: Option<Vec<MixtureEntry>>,
}

impl StateEntry {
    fn into_spec(self) -> Result<WidthSpec> {
        let correlations = self
            .correlations
            .into_iter()
            .map(|c| {
                let [i, j] = c.pair;
                if i == 0 || j == 0 {
                    return Err(Error::InvalidWidthSpec(
                        "particles are numbered from 1".into(),
                    ));
                }
                Ok(Correlation {
                    pair: (i - 1, j - 1),
                    sigma_c: c.sigma_c.into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        WidthSpec::new(self.sigma.map(f64::from), correlations)
    }
}

/// Parses a state file body into a mixture (a pure state is a one-element
/// mixture).
pub fn parse_state(text: &str) -> Result<GaussianMixture> {
    let file: StateFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<state>".into(),
        reason: e.to_string(),
    })?;
    match (file.sigma, file.mixture) {
        (Some(sigma), None) => {
            let spec = StateEntry {
                sigma,
                correlations: file.correlations,
            }
            .into_spec()?;
            Ok(spec.into())
        }
        (None, Some(entries)) => {
            if !file.correlations.is_empty() {
                return Err(Error::InvalidMixture(
                    "top-level correlations are not allowed alongside `mixture`".into(),
                ));
            }
            let components = entries
                .into_iter()
                .map(|e| {
                    Ok(MixtureComponent {
                        weight: e.weight.into(),
                        mean: e.mean.map(|m| m.map(f64::from)).unwrap_or([0.0; 3]),
                        spec: e.state.into_spec()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            GaussianMixture::new(components)
        }
        (Some(_), Some(_)) => Err(Error::InvalidMixture(
            "give either `sigma` or `mixture`, not both".into(),
        )),
        (None, None) => Err(Error::InvalidMixture(
            "state file needs `sigma` or `mixture`".into(),
        )),
    }
}

pub fn load_state(path: &Path) -> Result<GaussianMixture> {
    let text = std::fs::read_to_string(path)?;
    parse_state(&text).map_err(|e| match e {
        Error::Parse { reason, .. } => Error::Parse {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}
