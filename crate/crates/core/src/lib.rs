//! Approximate inference in discrete Bayesian networks by deleting edges.
//!
//! Each deleted edge `U -> X` is compensated by a clone `U'` (a root feeding
//! `X`, with prior `PM`) and an observed binary child `S'` of `U` (with
//! likelihood `SE`). The edge parameters are searched by one of two
//! fixed-point iterations:
//!
//! * **ED-BP**, whose fixed points are those of iterative belief propagation
//!   when the approximation is a polytree;
//! * **ED-KL**, whose fixed points are stationary points of
//!   `KL(Pr(.|e), Pr'(.|e'))` weighted by the true distribution and which
//!   requires exact marginals of the original network.
//!
//! The crate also provides exact inference by variable elimination, an edge
//! ranking driven by single-edge KL scores, MAP on the approximate network,
//! and an experiment harness.

pub mod deletion;
pub mod divergence;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod factor;
pub mod fixtures;
pub mod harness;
pub mod map;
pub mod model;
pub mod netio;
pub mod par;
pub mod param;
pub mod synth;

pub use deletion::{augment, delete_edges, recover_marginals, DeletionPlan, EdgeParams, PlanEntry};
pub use engine::{EngineConfig, EngineState};
pub use error::{Error, Result};
pub use factor::Factor;
pub use model::{validate_network, Cpt, Evidence, Network, NetworkKind, VarId, Variable};
