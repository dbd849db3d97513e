//! Numerical laboratory for KPP-type reaction-dispersal equations
//! `u_t = A u + u f(t, x, u)` with random, nonlocal and lattice dispersal.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: truncated habitats, periodic cells and sampled fields;
//! * [`dispersal`]: the three dispersal operators and their tilted forms;
//! * [`reaction`]: logistic KPP media and hypothesis sampling;
//! * [`evolve`]: explicit integrators, period maps and the comparison harness;
//! * [`spectral`]: principal growth rates and variational spreading speeds;
//! * [`analysis`]: part metric, periodic attractors, uniqueness, tails and fronts;
//! * [`io`]: CSV serialization of fields, trajectories and kernels.

pub mod analysis;
pub mod dispersal;
pub mod domain;
pub mod error;
pub mod evolve;
pub mod io;
pub mod optimize;
pub mod reaction;
pub mod spectral;

pub use dispersal::{
    apply_dispersal, apply_tilted, DispersalOperator, DispersalSpec, KernelSpec, LatticeRates, TiltSpec,
};
pub use domain::{
    build_domain, extend_periodic, restrict_to_cell, sup_norm_gap, Cell, CellField, Domain, DomainSpec,
    Field, GridKind, Point,
};
pub use error::{KppError, Result};
pub use evolve::{IntegratorSpec, Model, Scheme, Trajectory};
pub use reaction::{eval_f, linearize_at_zero, Coefficient, ParametricKpp, Perturbation, ReactionSpec};
pub use spectral::{principal_growth, variational_speed, CellProblem, EigenEstimate, SpeedResult};
