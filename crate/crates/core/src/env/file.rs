//! Instance files (TOML).
//!
//! ```toml
//! dimension = 2
//! num_agents = 2
//! horizon = 100
//! noise_std = 1.0
//! theta_star = [0.7, 0.3]
//!
//! [actions]
//! kind = "fixed"                      # fixed | per-agent | explicit | modulated
//! set = [[1.0, 0.0], [0.0, 1.0]]
//! ```
//!
//! or, instead of `theta_star` / `[actions]`, a generator:
//!
//! ```toml
//! horizon = 1024
//! noise_std = 1.0
//!
//! [generator]
//! kind = "synthetic"
//! family = "cyclic-symmetric"
//! ```
//!
//! Floats are written in shortest round-trip form, so a written instance reads
//! back bit-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionProfile, ActionSet, ProblemInstance};
use crate::error::{Error, Result};
use crate::instances::Generator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_agents: Option<usize>,
    pub horizon: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<ProfileFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileFile {
    Fixed {
        set: Vec<Vec<f64>>,
    },
    PerAgent {
        sets: Vec<Vec<Vec<f64>>>,
    },
    /// `sets[agent][t - 1][k]`
    Explicit {
        sets: Vec<Vec<Vec<Vec<f64>>>>,
    },
    Modulated {
        base: Vec<Vec<f64>>,
        contexts: Vec<Vec<f64>>,
        schedule: Vec<Vec<usize>>,
    },
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        let actions = match inst.profile() {
            ActionProfile::Fixed(s) => ProfileFile::Fixed { set: s.to_vecs() },
            ActionProfile::PerAgent(sets) => ProfileFile::PerAgent {
                sets: sets.iter().map(ActionSet::to_vecs).collect(),
            },
            ActionProfile::Explicit(rows) => ProfileFile::Explicit {
                sets: rows.iter().map(|r| r.iter().map(ActionSet::to_vecs).collect()).collect(),
            },
            ActionProfile::Modulated {
                base,
                contexts,
                schedule,
            } => ProfileFile::Modulated {
                base: base.to_vecs(),
                contexts: contexts.clone(),
                schedule: schedule.clone(),
            },
        };
        Self {
            dimension: Some(inst.dim()),
            num_agents: Some(inst.num_agents()),
            horizon: inst.horizon(),
            noise_std: inst.noise_std(),
            theta_star: Some(inst.theta_star().to_vec()),
            actions: Some(actions),
            generator: None,
        }
    }

    pub fn build(&self, base_dir: &Path) -> Result<ProblemInstance> {
        let inst = match (&self.generator, &self.theta_star, &self.actions) {
            (Some(g), None, None) => g.build(self.horizon, self.noise_std, base_dir)?,
            (None, Some(theta), Some(actions)) => {
                let num_agents = self
                    .num_agents
                    .ok_or_else(|| Error::Parse("explicit instance needs num_agents".into()))?;
                let profile = match actions {
                    ProfileFile::Fixed { set } => ActionProfile::Fixed(ActionSet::new(set.clone())?),
                    ProfileFile::PerAgent { sets } => ActionProfile::PerAgent(
                        sets.iter().cloned().map(ActionSet::new).collect::<Result<_>>()?,
                    ),
                    ProfileFile::Explicit { sets } => ActionProfile::Explicit(
                        sets.iter()
                            .map(|row| row.iter().cloned().map(ActionSet::new).collect::<Result<Vec<_>>>())
                            .collect::<Result<_>>()?,
                    ),
                    ProfileFile::Modulated {
                        base,
                        contexts,
                        schedule,
                    } => ActionProfile::Modulated {
                        base: ActionSet::new(base.clone())?,
                        contexts: contexts.clone(),
                        schedule: schedule.clone(),
                    },
                };
                ProblemInstance::new(theta.clone(), profile, num_agents, self.horizon, self.noise_std)?
            }
            _ => {
                return Err(Error::Parse(
                    "instance file needs either [generator] or theta_star + [actions], not both".into(),
                ))
            }
        };
        if let Some(d) = self.dimension {
            if d != inst.dim() {
                return Err(Error::Parse(format!("dimension = {d} but instance has dimension {}", inst.dim())));
            }
        }
        if let Some(m) = self.num_agents {
            if m != inst.num_agents() {
                return Err(Error::Parse(format!(
                    "num_agents = {m} but instance has {} agents",
                    inst.num_agents()
                )));
            }
        }
        Ok(inst)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<ProblemInstance> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = Self::from_toml(&text)?;
        file.build(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn write(inst: &ProblemInstance, path: &Path) -> Result<()> {
        let text = Self::from_instance(inst).to_toml()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
