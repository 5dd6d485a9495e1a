//! Compiler, tick-accurate simulator and bounded verifier for a synchronous
//! language with continuous variables discretised by the worst-case
//! reaction time (WCRT).
//!
//! Pipeline: [`syntax::parse`] → [`syntax::reject_nonlinear_combine`] →
//! [`rewrite::rewrite_flows`] → [`kernel::Kernel`] which runs ticks and
//! records a [`trace::Trace`]. [`verify`] explores input schedules over the
//! same kernel; [`lti`] and [`haref`] are the analytic and reference-model
//! companions.

pub mod corpus;
pub mod haref;
pub mod kernel;
pub mod lti;
pub mod rational;
pub mod rewrite;
pub mod syntax;
pub mod trace;
pub mod ttl;
pub mod value;
pub mod verify;

pub use rational::Rational;
pub use value::Value;
