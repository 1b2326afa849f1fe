//! Random walks on sparse random directed multigraphs drawn from the
//! configuration model: degree statistics, graph sampling, total-variation
//! mixing profiles, path-weight tail estimators, and the branching-process
//! objects that describe the equilibrium measure in the large-graph limit.

pub mod degrees;
pub mod graphmodel;
pub mod limits;
pub mod numeric;
pub mod paths;
pub mod reference;
pub mod rng;
pub mod walk;

pub use degrees::{build_degree_sequence, compute_stats, DegreeSequence, SeqStats};
pub use graphmodel::{sample_environment, BallReport, CollisionTrace, Direction, Environment};
pub use limits::{PoolLabel, SamplePool};
pub use paths::WeightQuery;
pub use walk::{Distribution, WalkProfile};
