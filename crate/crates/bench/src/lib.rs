//! Benchmark fixtures: representative models for each dispersal class.

use std::sync::Arc;

use kpp_core::reaction::Periods;
use kpp_core::{
    build_domain, CellProblem, Coefficient, DispersalSpec, Domain, DomainSpec, Field, IntegratorSpec, KernelSpec,
    LatticeRates, Model, ParametricKpp, Perturbation, ReactionSpec,
};

/// The three dispersal classes with a domain of roughly `n` points each.
pub fn operator_cases(n: usize) -> Vec<(&'static str, Arc<Domain>, DispersalSpec)> {
    let half = n as f64 / 2.0 * 0.1;
    let continuum = Arc::new(build_domain(&DomainSpec::continuum(1, half.round(), 0.1, 1.0)).unwrap());
    let lattice = Arc::new(build_domain(&DomainSpec::lattice(1, n / 2, 1)).unwrap());
    vec![
        ("random", continuum.clone(), DispersalSpec::Random),
        (
            "nonlocal",
            continuum,
            DispersalSpec::Nonlocal {
                kernel: KernelSpec::bump(1.0).unwrap(),
            },
        ),
        (
            "lattice",
            lattice,
            DispersalSpec::Discrete {
                rates: LatticeRates::symmetric(1, 1.0),
            },
        ),
    ]
}

/// `r0 = 1 + 0.3 cos(2 pi x)` with a unit-radius bump.
pub fn periodic_reaction() -> ReactionSpec {
    let kpp = ParametricKpp {
        r0: Coefficient::space_cosine(1.0, 0.3),
        b: Coefficient::constant(1.0),
        perturbation: Perturbation::Bump {
            amplitude: 0.5,
            radius: 1.0,
        },
    };
    ReactionSpec::kpp(kpp, 1.0, &[1.0]).unwrap()
}

pub fn model(domain: &Arc<Domain>, dispersal: &DispersalSpec) -> Model {
    Model::new(domain, dispersal, periodic_reaction(), IntegratorSpec::euler(0.002)).unwrap()
}

/// A smooth positive field.
pub fn smooth(domain: &Arc<Domain>) -> Field {
    Field::from_fn(domain.clone(), |x| 0.5 + 0.4 * (0.7 * x[0]).sin()).unwrap()
}

/// Space-time periodic cell problem on a cell with `1 / h` points.
pub fn cell_problem(h: f64, dispersal: DispersalSpec) -> CellProblem {
    let cell = build_domain(&DomainSpec::continuum(1, 1.0, h, 1.0)).unwrap().cell().clone();
    let periods = Periods {
        time: 1.0,
        space: [1.0, 1.0],
    };
    CellProblem::new(cell, dispersal, Coefficient::time_sine(1.0, 0.5), periods).unwrap()
}
