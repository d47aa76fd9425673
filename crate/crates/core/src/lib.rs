//! Exact stochastic simulation of the demographic prisoner's dilemma particle
//! system, its random-matching limit and its mean-field limit, plus the
//! statistics used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod game;
pub mod graph;
pub mod initial;
pub mod matching;
pub mod meanfield;
pub mod rng;
pub mod spatial;
mod sumtree;
pub mod trajectory;
pub mod wealth;

pub use error::{Error, Result};
pub use game::{
    general_outcome, pd_outcome, Coin, GameSpec, GeneralGame, MixedStrategy, ParticleState, PdPayoffs, Strategy,
};
pub use graph::{collision_mass, stationary_distribution, Graph, Space};
pub use initial::{Atom, InitialMeasure, PositionLaw};
pub use matching::{init_matching, MatchingInitial, MatchingSystem};
pub use spatial::{init_spatial, occupation_fraction, EventRates, Initial, SpatialSystem};
pub use trajectory::{Engine, Event, EventCounts, EventKind, Snapshot, Trajectory};
pub use wealth::{make_amount, Scale, Wealth};

pub use meanfield::{
    build_lattice, general_drift, pd_drift, rk4_step, LatticeParams, LatticeSpec, MeanFieldModel, MeanFieldState,
};
