//! Galton-Watson trees conditioned on recursive events.
//!
//! The library builds level-dependent branching processes, conditions them on
//! recursive events (survival to a target level, or general m-type events
//! defined through counting-vector partitions), samples from the conditioned
//! measures, and evaluates them exactly. On top of that it computes the
//! expected cost of depth-first searching a random tree until a node at the
//! target level is found, both by exact recursion and by Monte Carlo
//! simulation, with closed forms, asymptotics and offspring-mean optimization
//! for the Poisson case.

pub mod cost;
pub mod error;
pub mod multitype;
pub mod offspring;
pub mod poisson;
pub mod survival;
pub mod tree;

pub use error::{Error, Result};
pub use offspring::{JointWx, OffspringSchedule, Pmf};
pub use survival::SurvivalTable;
pub use tree::Tree;
