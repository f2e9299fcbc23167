//! Functional distributional semantics.
//!
//! Words are modelled as semantic functions: probabilistic classifiers over
//! a sparse binary space of entities. A Cardinality-RBM-style background
//! distribution couples the entities of a situation through link-labelled
//! weight matrices, and each entity generates a predicate in proportion to
//! frequency times truth. Training maximises the likelihood of observed
//! lexicalised dependency graphs using MCMC gradient estimates.

pub mod cardinality;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod exact;
pub mod generate;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod posterior;
pub mod rng;
pub mod space;
pub mod synthetic;
pub mod trainer;

pub use corpus::{GraphShape, GraphToken, LabelTable, Link, LinkLabel, PredicateId, Vocabulary};
pub use error::{Error, ErrorKind, Result};
pub use mcmc::{AveragePredicate, LatentState};
pub use model::{Model, Params, Situation};
pub use space::{EntityVector, SpaceConfig};
pub use trainer::{Hyperparams, TrainState, Trainer};
