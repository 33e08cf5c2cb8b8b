//! Single-server queues with balking and abandonment under two
//! abandonment-detection disciplines.
//!
//! * [`standard_queue`]: a physical line, abandonment is seen the instant it
//!   happens.
//! * [`ticket_queue`]: numbered tickets, an abandoned ticket is only
//!   discovered when it reaches the front of the board.
//!
//! Both disciplines are driven by the same [`primitives::CustomerPrimitives`]
//! stream so that paired runs share common random numbers. The
//! [`rou`] module carries the closed-form heavy-traffic approximations built
//! on the regulated Ornstein-Uhlenbeck limit, [`stats`] turns trajectories
//! into steady-state estimates and [`coupling`] runs the diffusion-scaling
//! experiments. [`harness`] wires everything into tables and a CLI.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calendar;
pub mod coupling;
pub mod error;
pub mod harness;
pub mod primitives;
pub mod rou;
pub mod standard_queue;
pub mod stats;
pub mod ticket_queue;
pub mod trajectory;

pub use error::{Error, Result};
pub use primitives::{
    CustomerPrimitives, DistributionSpec, Family, InitialConditions, Law, Role, SystemParams,
};
pub use trajectory::{Discipline, Trajectory};
