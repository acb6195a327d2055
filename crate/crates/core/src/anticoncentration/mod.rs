//! Small-ball probabilities, generalized arithmetic progressions, exact
//! rational solves and the exact check of the non-structural row bound.

pub mod claim;
pub mod gap;
pub mod rational;
pub mod smallball;

pub use claim::*;
pub use gap::*;
pub use rational::*;
pub use smallball::*;
