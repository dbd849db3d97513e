use kpp_core::reaction::{FourierTerm, Periods, Trig};
use kpp_core::spectral::EigenOptions;
use kpp_core::{
    build_domain, principal_growth, Cell, CellProblem, Coefficient, DispersalSpec, DomainSpec, KernelSpec,
    TiltSpec,
};

const INV_TOL: f64 = 1e-8;

fn cell(dim: usize, h: f64) -> Cell {
    build_domain(&DomainSpec::continuum(dim, 1.0, h, 1.0)).unwrap().cell().clone()
}

fn periods() -> Periods {
    Periods {
        time: 1.0,
        space: [1.0, 1.0],
    }
}

/// `mean + 0.4 cos(2 pi x) + 0.3 sin(2 pi t)`, varying in both time and space.
fn mixed(mean: f64) -> Coefficient {
    Coefficient::Fourier {
        mean,
        terms: vec![
            FourierTerm {
                amplitude: 0.4,
                time: 0,
                space: [1, 0],
                trig: Trig::Cos,
                phase: 0.0,
            },
            FourierTerm {
                amplitude: 0.3,
                time: 1,
                space: [0, 0],
                trig: Trig::Sin,
                phase: 0.0,
            },
        ],
    }
}

fn lambda(p: &CellProblem, xi: &[f64], mu: f64) -> f64 {
    principal_growth(p, &TiltSpec::new(xi, mu).unwrap(), &EigenOptions::default())
        .unwrap()
        .lambda
}

#[test]
fn adding_a_constant_shifts_lambda() {
    let base = CellProblem::new(cell(1, 0.1), DispersalSpec::Random, mixed(0.2), periods()).unwrap();
    let shifted = base.with_coefficient(mixed(1.7));
    for mu in [0.0, 0.8] {
        let d = lambda(&shifted, &[1.0], mu) - lambda(&base, &[1.0], mu);
        assert!((d - 1.5).abs() < INV_TOL, "mu={mu}: {d}");
    }
}

#[test]
fn lambda_is_monotone_in_the_coefficient() {
    let lo = CellProblem::new(cell(1, 0.1), DispersalSpec::Random, mixed(0.0), periods()).unwrap();
    let hi = lo.with_coefficient(Coefficient::space_cosine(0.75, 0.4));
    // 0.75 + 0.4 cos >= 0.3 sin + 0.4 cos pointwise
    assert!(lambda(&lo, &[1.0], 0.5) <= lambda(&hi, &[1.0], 0.5) + INV_TOL);
}

#[test]
fn zero_tilt_ignores_direction() {
    let p = CellProblem::new(cell(2, 0.125), DispersalSpec::Random, mixed(0.1), periods()).unwrap();
    let a = lambda(&p, &[1.0, 0.0], 0.0);
    let b = lambda(&p, &[0.6, 0.8], 0.0);
    assert!((a - b).abs() < INV_TOL);
}

#[test]
fn reversed_direction_in_symmetric_medium() {
    let p = CellProblem::new(cell(1, 0.1), DispersalSpec::Random, mixed(0.0), periods()).unwrap();
    assert!((lambda(&p, &[1.0], 1.1) - lambda(&p, &[-1.0], 1.1)).abs() < INV_TOL);
}

#[test]
fn kernel_exponential_moment() {
    // direct summation over the midpoint-quadrature bump weights
    let (h, r) = (0.1f64, 1.0f64);
    let reach = (r / h).ceil() as i64;
    let mut raw = Vec::new();
    for k in -reach..=reach {
        let s = (k as f64 * h / r).abs();
        if s < 1.0 {
            raw.push((k, (-1.0 / (1.0 - s * s)).exp()));
        }
    }
    let mass: f64 = raw.iter().map(|(_, w)| w).sum();
    let spec = DispersalSpec::Nonlocal {
        kernel: KernelSpec::bump(r).unwrap(),
    };
    let p = CellProblem::new(cell(1, h), spec, Coefficient::constant(0.5), periods()).unwrap();
    for mu in [0.0, 0.7, 2.5] {
        let moment: f64 = raw.iter().map(|(k, w)| w / mass * (mu * *k as f64 * h).exp()).sum();
        let want = moment - 1.0 + 0.5;
        let got = lambda(&p, &[1.0], mu);
        assert!((got - want).abs() < 1e-6, "mu={mu}: {got} vs {want}");
    }
}

#[test]
fn random_dispersal_symbol() {
    let p = CellProblem::new(cell(1, 0.05), DispersalSpec::Random, Coefficient::constant(0.3), periods()).unwrap();
    for mu in [0.5, 1.0, 2.0] {
        assert!((lambda(&p, &[1.0], mu) - (mu * mu + 0.3)).abs() < 1e-3);
    }
}
