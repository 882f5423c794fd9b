//! Chance-constrained economic dispatch with inverter frequency support.
//!
//! The pipeline: load a [`grid::GridCase`], sample a [`scenario::ScenarioSet`],
//! build a [`model::BuiltModel`] in one of three modes, reformulate the
//! joint chance constraints with [`reform::reform`] (scenario MILP or its
//! mixing-cut LP tightening), solve through [`solve::solve`], then check the
//! decision with [`sim::verify_decision`] and [`evaluate::ex_post_evaluate`].

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would accept it, and the numeric
// code indexes parallel arrays; both trip pedantic lints on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod evaluate;
pub mod grid;
pub mod model;
pub mod reform;
pub mod scenario;
pub mod sfr;
pub mod sim;
pub mod solve;
