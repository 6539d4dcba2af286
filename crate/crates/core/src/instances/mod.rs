//! Problem-instance constructors: the 25-arm synthetic families, a plain
//! gapped-arm instance, and MovieLens attribute-partitioned instances.

mod movielens;
mod synthetic;
mod zipcodes;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::file::InstanceFile;
use crate::env::ProblemInstance;
use crate::error::Result;

pub use movielens::{
    age_bracket, age_labels, embed_svd, fit_theta_star, group_users, load_movielens, occupation_class, read_embedding_file,
    read_ratings, read_users, write_embedding_file, write_ml100k_fixture, ActionMode, Attribute, FixtureSpec, Grouping,
    MovieLens, MovieLensSpec, RatingRecord, RegressionRecord, SparseRatings, SvdEmbedding, UserRecord,
    OCCUPATION_CLASSES,
};
pub use synthetic::{
    make_asymmetric_synthetic, make_cyclic_synthetic, make_gapped_arms, make_synthetic, synthetic_theta, Family,
    SyntheticSpec, SYNTH_DIM,
};
pub use zipcodes::state_for_zip;

/// Declarative instance source, as written in instance and experiment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    Synthetic {
        family: Family,
        /// Keep only these agents (relabelled `0..`), in this order.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agents: Option<Vec<usize>>,
    },
    GappedArms {
        gaps: Vec<f64>,
        num_agents: usize,
    },
    Movielens(MovieLensSpec),
}

/// An instance plus human-readable agent labels.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub instance: ProblemInstance,
    pub labels: Vec<String>,
}

pub fn default_labels(num_agents: usize) -> Vec<String> {
    (0..num_agents).map(|a| format!("agent {a}")).collect()
}

impl Generator {
    pub fn build(&self, horizon: usize, noise_std: f64, base_dir: &Path) -> Result<ProblemInstance> {
        Ok(self.build_labeled(horizon, noise_std, base_dir)?.instance)
    }

    pub fn build_labeled(&self, horizon: usize, noise_std: f64, base_dir: &Path) -> Result<LabeledInstance> {
        let instance = match self {
            Generator::Synthetic { family, agents } => {
                let inst = make_synthetic(&SyntheticSpec { family: *family, horizon, noise_std })?;
                match agents {
                    Some(keep) => inst.restrict_agents(keep)?,
                    None => inst,
                }
            }
            Generator::GappedArms { gaps, num_agents } => make_gapped_arms(gaps, *num_agents, horizon, noise_std)?,
            Generator::Movielens(spec) => {
                let ml = load_movielens(spec, horizon, noise_std, base_dir)?;
                return Ok(LabeledInstance { instance: ml.instance, labels: ml.labels });
            }
        };
        let labels = default_labels(instance.num_agents());
        Ok(LabeledInstance { instance, labels })
    }
}

/// SHA-256 (hex) of the instance's canonical file form.
pub fn instance_digest(inst: &ProblemInstance) -> Result<String> {
    let text = InstanceFile::from_instance(inst).to_toml()?;
    Ok(hex(&Sha256::digest(text.as_bytes())))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
