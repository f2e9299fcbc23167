use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimisation and sampling settings. Defaults are documented starting
/// points, not tuned values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    /// Decay `rho` of the squared-gradient sum; 1 is plain AdaGrad.
    pub adagrad_decay: f64,
    pub adagrad_epsilon: f64,
    pub l1: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub n_particles: usize,
    pub particle_sweeps_per_batch: usize,
    pub steps_per_variable: usize,
    pub z_ratio_k: f64,
    /// Use the exact choice normaliser in latent entity steps instead of
    /// the average-predicate approximation.
    #[serde(default)]
    pub exact_z_ratio: bool,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            adagrad_decay: 0.9,
            adagrad_epsilon: 1e-8,
            l1: 1e-6,
            l2: 1e-4,
            batch_size: 100,
            n_particles: 50,
            particle_sweeps_per_batch: 1,
            steps_per_variable: 1,
            z_ratio_k: 1.0,
            exact_z_ratio: false,
            epochs: 10,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate (must be > 0)");
        }
        if !(self.adagrad_decay > 0.0 && self.adagrad_decay <= 1.0) {
            return bad("adagrad_decay (must be in (0, 1])");
        }
        if !(self.adagrad_epsilon >= 0.0 && self.adagrad_epsilon.is_finite()) {
            return bad("adagrad_epsilon (must be >= 0)");
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite()) || !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("regularisation strength (must be >= 0)");
        }
        if self.batch_size == 0 {
            return bad("batch_size (must be >= 1)");
        }
        if self.n_particles == 0 {
            return bad("n_particles (must be >= 1)");
        }
        if self.particle_sweeps_per_batch == 0 {
            return bad("particle_sweeps_per_batch (must be >= 1)");
        }
        if self.steps_per_variable == 0 {
            return bad("steps_per_variable (must be >= 1)");
        }
        if !(self.z_ratio_k > 0.0 && self.z_ratio_k.is_finite()) {
            return bad("z_ratio_k (must be > 0)");
        }
        Ok(())
    }
}
