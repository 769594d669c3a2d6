//! Discrete conjugate nets inscribed in quadrics.
//!
//! The crate is organised in layers:
//!
//! * [`projlin`]: homogeneous coordinates, joins, meets, quadrics, pencils.
//! * [`qnet`]: Q-nets, Laplace transforms and their degeneracies.
//! * [`inscribed`]: Q-nets on quadrics, the conjugacy criterion and the
//!   extension algorithm for nets with constrained parameter lines.
//! * [`moebius`]: circular nets through the Möbius lift, the constrained
//!   incidence constructions and their envelope structure.
//! * [`lie`]: contact elements and principal contact element nets.
//! * [`cyclide`]: Darboux cyclides as base loci of pencils through the
//!   Möbius quadric.
//! * [`suite`]: randomized verification suites with structured reports.

pub mod error;
pub mod cyclide;
pub mod inscribed;
pub mod projlin;
pub mod moebius;
pub mod qnet;
pub mod sample;
pub mod ser;
pub mod lie;
pub mod suite;

pub use error::{GeomError, Result};
