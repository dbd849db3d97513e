//! Principal growth rates of `-d/dt + A_{xi,mu} + a(t, x)` on time-space
//! periodic functions, computed from the linear period (Floquet) map, and
//! the variational spreading speed `c*(xi) = inf_{mu > 0} lambda_{xi,mu} / mu`.
//!
//! The period map of a cooperative linear system is positive, so power
//! iteration from the constant field converges to the dominant growth
//! factor `exp(lambda T)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersal::{CellOperator, DispersalSpec, TiltSpec};
use crate::domain::{Cell, CellField, Point};
use crate::error::{KppError, Result};
use crate::evolve::steps_for;
use crate::optimize::{geometric_grid, GoldenSection};
use crate::reaction::{linearize_at_zero, Coefficient, Periods, ReactionSpec, SampledCoefficient};

/// Number of time slabs used when a custom reaction must be tabulated.
const LINEARIZATION_SLABS: usize = 64;

/// Growth is renormalized whenever the sup norm leaves `[1/RESCALE, RESCALE]`.
const RESCALE: f64 = 1e100;

/// Linear periodic problem `v_t = A_{xi,mu} v + a(t, x) v` on one cell.
#[derive(Debug, Clone)]
pub struct CellProblem {
    cell: Cell,
    dispersal: DispersalSpec,
    coefficient: Coefficient,
    periods: Periods,
}

impl CellProblem {
    pub fn new(cell: Cell, dispersal: DispersalSpec, coefficient: Coefficient, periods: Periods) -> Result<Self> {
        if !(periods.time > 0.0) {
            return Err(KppError::config("reaction.period", "temporal period must be positive"));
        }
        Ok(CellProblem {
            cell,
            dispersal,
            coefficient,
            periods,
        })
    }

    /// The linearization of `reaction` at `u = 0` (perturbation excluded) on `cell`.
    pub fn from_reaction(reaction: &ReactionSpec, dispersal: &DispersalSpec, cell: &Cell) -> Result<Self> {
        let a = linearize_at_zero(reaction, cell, LINEARIZATION_SLABS)?;
        CellProblem::new(cell.clone(), dispersal.clone(), a, reaction.periods())
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coefficient
    }

    pub fn period(&self) -> f64 {
        self.periods.time
    }

    pub fn with_coefficient(&self, coefficient: Coefficient) -> Self {
        CellProblem {
            coefficient,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Convergence when the last `window` log growth factors agree to this tolerance.
    pub rel_tol: f64,
    pub window: usize,
    pub max_iter: usize,
    /// Step size is at most `safety / operator bound`.
    pub safety: f64,
    pub max_dt: f64,
    /// Eigen-residual below which the estimate is certified principal.
    pub eigen_tol: f64,
    /// Stored phases of the eigenfunction over one period.
    pub phases: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            rel_tol: 1e-10,
            window: 5,
            max_iter: 10_000,
            safety: 0.5,
            max_dt: 1e-3,
            eigen_tol: 1e-6,
            phases: 8,
        }
    }
}

/// Time-`T` flow of the linear cell problem, RK4 with a fixed step.
struct LinearFlow {
    op: CellOperator,
    a: SampledCoefficient,
    period: f64,
    n_steps: usize,
    phases: usize,
}

impl LinearFlow {
    fn new(problem: &CellProblem, tilt: &TiltSpec, opts: &EigenOptions) -> Result<Self> {
        let op = CellOperator::new(&problem.dispersal, &problem.cell, tilt)?;
        let points: Vec<Point> = (0..problem.cell.len()).map(|j| problem.cell.coord(j)).collect();
        let a = SampledCoefficient::new(&problem.coefficient, problem.periods, &points);
        let a_bound = problem
            .coefficient
            .max_value()
            .abs()
            .max(problem.coefficient.min_value().abs());
        let bound = op.stencil().bound() + a_bound;
        let dt = opts.max_dt.min(opts.safety / bound.max(f64::MIN_POSITIVE));
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(KppError::Cfl { dt, limit: 0.0 });
        }
        let phases = opts.phases.max(1);
        let (n, _) = steps_for(problem.periods.time, dt);
        Ok(LinearFlow {
            op,
            a,
            period: problem.periods.time,
            n_steps: n.div_ceil(phases) * phases,
            phases,
        })
    }

    fn dt(&self) -> f64 {
        self.period / self.n_steps as f64
    }

    fn rhs(&self, t: f64, v: &[f64], out: &mut [f64], a: &mut [f64]) {
        self.op.apply_into(v, out);
        self.a.fill(t, a);
        for ((o, vi), ai) in out.iter_mut().zip(v).zip(a.iter()) {
            *o += ai * vi;
        }
    }

    /// Advances `v` over one period starting at `t = 0`; returns the log of the
    /// scale removed from `v`. Optionally records `v` at the stored phases
    /// (rescaled to the running normalization).
    fn run(&self, v: &mut [f64], mut record: Option<&mut Vec<Vec<f64>>>) -> Result<f64> {
        let n = v.len();
        let dt = self.dt();
        let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut stage = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut log_scale = 0.0f64;
        let stride = self.n_steps / self.phases;
        for s in 0..self.n_steps {
            if let Some(rec) = record.as_deref_mut() {
                if s % stride == 0 {
                    let scale = log_scale;
                    rec.push(v.iter().map(|x| x * scale.exp()).collect());
                }
            }
            let t = s as f64 * dt;
            let [k1, k2, k3, k4] = &mut k;
            self.rhs(t, v, k1, &mut a);
            for i in 0..n {
                stage[i] = v[i] + 0.5 * dt * k1[i];
            }
            self.rhs(t + 0.5 * dt, &stage, k2, &mut a);
            for i in 0..n {
                stage[i] = v[i] + 0.5 * dt * k2[i];
            }
            self.rhs(t + 0.5 * dt, &stage, k3, &mut a);
            for i in 0..n {
                stage[i] = v[i] + dt * k3[i];
            }
            self.rhs(t + dt, &stage, k4, &mut a);
            let mut sup = 0.0f64;
            for i in 0..n {
                v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                sup = sup.max(v[i].abs());
            }
            if !sup.is_finite() {
                return Err(KppError::BlowUp { time: t + dt });
            }
            if sup > RESCALE || (sup < 1.0 / RESCALE && sup > 0.0) {
                v.iter_mut().for_each(|x| *x /= sup);
                log_scale += sup.ln();
            }
        }
        Ok(log_scale)
    }
}

/// The time-`T` solution map of `v_t = A_{xi,mu} v + a v` applied to `v0`.
pub fn linear_period_map(
    problem: &CellProblem,
    tilt: &TiltSpec,
    v0: &CellField,
    opts: &EigenOptions,
) -> Result<CellField> {
    if v0.cell() != problem.cell() {
        return Err(KppError::DomainMismatch("initial field lives on another cell".into()));
    }
    let flow = LinearFlow::new(problem, tilt, opts)?;
    let mut v = v0.values().to_vec();
    let log_scale = flow.run(&mut v, None)?;
    let scale = log_scale.exp();
    CellField::new(
        problem.cell.clone(),
        v.into_iter().map(|x| x * scale).collect(),
        v0.time() + problem.period(),
    )
}

/// Principal growth rate `lambda_{xi,mu}(a)` and its periodic eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub lambda: f64,
    pub tilt: TiltSpec,
    pub iterations: usize,
    /// `|| Phi v e^{-lambda T} - v ||_inf / || v ||_inf`.
    pub residual: f64,
    /// Residual below tolerance and the eigenfunction strictly positive.
    pub certified: bool,
    /// Eigenfunction (sup norm 1 at `t = 0`) at equally spaced phases in `[0, T)`.
    pub eigenfunction: Vec<CellField>,
}

pub fn principal_growth(problem: &CellProblem, tilt: &TiltSpec, opts: &EigenOptions) -> Result<EigenEstimate> {
    let flow = LinearFlow::new(problem, tilt, opts)?;
    let period = problem.period();
    let window = opts.window.max(2);
    let mut v = vec![1.0; problem.cell.len()];
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let log_scale = flow.run(&mut v, None)?;
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(sup > 0.0) {
            return Err(KppError::BlowUp { time: period * history.len() as f64 });
        }
        v.iter_mut().for_each(|x| *x /= sup);
        history.push(sup.ln() + log_scale);
        if history.len() >= window {
            let tail = &history[history.len() - window..];
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            if hi - lo <= opts.rel_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let tail = &history[history.len().saturating_sub(window)..];
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(KppError::NonConvergence {
            iterations: history.len(),
            spread: hi - lo,
        });
    }
    let log_factor = *history.last().unwrap();
    let lambda = log_factor / period;

    // one more period to record the eigenfunction and measure the residual
    let start = v.clone();
    let mut snaps = Vec::new();
    let log_scale = flow.run(&mut v, Some(&mut snaps))?;
    let norm = (log_scale - log_factor).exp();
    let residual = v
        .iter()
        .zip(&start)
        .map(|(w, s)| (w * norm - s).abs())
        .fold(0.0f64, f64::max);
    let dt_phase = period / flow.phases as f64;
    let eigenfunction = snaps
        .into_iter()
        .enumerate()
        .map(|(k, vals)| {
            // undo the growth accumulated within the period so phases share one normalization
            let damp = (-lambda * k as f64 * dt_phase).exp();
            CellField::new(
                problem.cell.clone(),
                vals.into_iter().map(|x| x * damp).collect(),
                k as f64 * dt_phase,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let positive = eigenfunction.iter().all(|e| e.min() > 0.0);
    Ok(EigenEstimate {
        lambda,
        tilt: *tilt,
        iterations: history.len(),
        residual,
        certified: residual <= opts.eigen_tol && positive,
        eigenfunction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMethod {
    Variational,
    FrontTracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub mu: f64,
    pub lambda: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedResult {
    pub c_star: f64,
    pub mu_star: f64,
    pub lambda_at_mu_star: f64,
    /// Growth rate at zero tilt; positive for every admissible medium.
    pub lambda_zero: f64,
    pub method: SpeedMethod,
    pub iterations: usize,
    pub certified: bool,
    pub trace: Vec<ScanPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedOptions {
    pub mu_min: f64,
    pub mu_max: f64,
    pub ratio: f64,
    /// Relative tolerance of the golden-section refinement in `mu`.
    pub mu_rel_tol: f64,
    /// The coarse scan stops after this many consecutive increases past the best point.
    pub rises: usize,
    pub eigen: EigenOptions,
}

impl Default for SpeedOptions {
    fn default() -> Self {
        SpeedOptions {
            mu_min: 1e-3,
            mu_max: 20.0,
            ratio: 1.3,
            mu_rel_tol: 1e-6,
            rises: 3,
            eigen: EigenOptions::default(),
        }
    }
}

/// `c*(xi) = inf_{mu > 0} lambda_{xi,mu} / mu` for the linearized cell problem.
///
/// A geometric `mu` grid brackets the minimum (the scan stops once the ratio
/// has risen `rises` times past the best point), then golden-section search
/// refines `mu*`.
pub fn variational_speed(problem: &CellProblem, xi: &[f64], opts: &SpeedOptions) -> Result<SpeedResult> {
    let zero = principal_growth(problem, &TiltSpec::new(xi, 0.0)?, &opts.eigen)?;
    if !(zero.lambda > 0.0) {
        return Err(KppError::DegenerateMedium { lambda: zero.lambda });
    }
    let eval = |mu: f64| -> Result<EigenEstimate> { principal_growth(problem, &TiltSpec::new(xi, mu)?, &opts.eigen) };

    let grid = geometric_grid(opts.mu_min, opts.mu_max, opts.ratio);
    let chunk = rayon::current_num_threads().clamp(4, 16);
    let mut trace: Vec<ScanPoint> = Vec::new();
    let mut best = 0usize;
    let mut next = 0usize;
    while next < grid.len() {
        let end = (next + chunk).min(grid.len());
        let batch: Vec<ScanPoint> = grid[next..end]
            .par_iter()
            .map(|&mu| {
                eval(mu).map(|e| ScanPoint {
                    mu,
                    lambda: e.lambda,
                    ratio: e.lambda / mu,
                })
            })
            .collect::<Result<_>>()?;
        trace.extend(batch);
        next = end;
        best = (0..trace.len())
            .min_by(|&i, &j| trace[i].ratio.total_cmp(&trace[j].ratio))
            .unwrap();
        let risen = trace[best..].windows(2).take_while(|w| w[1].ratio > w[0].ratio).count();
        if trace.len() - 1 - best >= opts.rises && risen >= opts.rises {
            break;
        }
    }
    if best == 0 {
        return Err(KppError::BracketEdge { mu: grid[0] });
    }
    if best + 1 >= trace.len() {
        return Err(KppError::BracketEdge { mu: trace[best].mu });
    }
    let gs = GoldenSection {
        rel_tol: opts.mu_rel_tol,
        max_iter: 200,
    };
    let (mu_star, c_star, _) = gs.minimize(|mu| eval(mu).map(|e| e.lambda / mu), trace[best - 1].mu, trace[best + 1].mu)?;
    let at = eval(mu_star)?;
    Ok(SpeedResult {
        c_star,
        mu_star,
        lambda_at_mu_star: at.lambda,
        lambda_zero: zero.lambda,
        method: SpeedMethod::Variational,
        iterations: at.iterations,
        certified: at.certified && zero.certified,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersal::{KernelSpec, LatticeRates};
    use crate::domain::{build_domain, DomainSpec};

    fn periods() -> Periods {
        Periods {
            time: 1.0,
            space: [1.0, 1.0],
        }
    }

    fn random_cell(h: f64) -> Cell {
        build_domain(&DomainSpec::continuum(1, 1.0, h, 1.0)).unwrap().cell().clone()
    }

    fn lattice_cell() -> Cell {
        build_domain(&DomainSpec::lattice(1, 1, 1)).unwrap().cell().clone()
    }

    fn discrete() -> DispersalSpec {
        DispersalSpec::Discrete {
            rates: LatticeRates::symmetric(1, 1.0),
        }
    }

    #[test]
    fn constants_fixed_without_growth() {
        let p = CellProblem::new(random_cell(0.1), DispersalSpec::Random, Coefficient::constant(0.0), periods()).unwrap();
        let v = CellField::constant(p.cell().clone(), 2.5);
        let out = linear_period_map(&p, &TiltSpec::new(&[1.0], 0.0).unwrap(), &v, &EigenOptions::default()).unwrap();
        assert!(out.values().iter().all(|&x| x == 2.5));
    }

    #[test]
    fn constant_growth_closed_form() {
        let p = CellProblem::new(random_cell(0.1), DispersalSpec::Random, Coefficient::constant(0.7), periods()).unwrap();
        let v = CellField::constant(p.cell().clone(), 1.0);
        let out = linear_period_map(&p, &TiltSpec::new(&[1.0], 0.0).unwrap(), &v, &EigenOptions::default()).unwrap();
        for &x in out.values() {
            assert!((x - 0.7f64.exp()).abs() < 1e-10);
        }
        let p1 = p.with_coefficient(Coefficient::constant(1.0));
        let out = linear_period_map(&p1, &TiltSpec::new(&[1.0], 1.0).unwrap(), &v, &EigenOptions::default()).unwrap();
        for &x in out.values() {
            assert!((x / 2.0f64.exp() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn random_symbol() {
        let p = CellProblem::new(random_cell(0.05), DispersalSpec::Random, Coefficient::constant(1.0), periods()).unwrap();
        let e = principal_growth(&p, &TiltSpec::new(&[1.0], 1.0).unwrap(), &EigenOptions::default()).unwrap();
        assert!((e.lambda - 2.0).abs() < 1e-3);
        assert!(e.certified);
        assert_eq!(e.eigenfunction.len(), 8);
    }

    #[test]
    fn lattice_symbol_is_exact() {
        let p = CellProblem::new(lattice_cell(), discrete(), Coefficient::constant(1.0), periods()).unwrap();
        for mu in [0.0, 0.3, 0.91, 2.0] {
            let e = principal_growth(&p, &TiltSpec::new(&[1.0], mu).unwrap(), &EigenOptions::default()).unwrap();
            let exact = (-mu).exp() + mu.exp() - 2.0 + 1.0;
            assert!((e.lambda - exact).abs() < 1e-8, "mu={mu}: {} vs {exact}", e.lambda);
        }
    }

    #[test]
    fn time_average_of_periodic_growth() {
        let p = CellProblem::new(random_cell(0.1), DispersalSpec::Random, Coefficient::time_sine(1.0, 0.5), periods()).unwrap();
        let e = principal_growth(&p, &TiltSpec::new(&[1.0], 0.0).unwrap(), &EigenOptions::default()).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-6);
        // eigenfunction follows exp(int_0^t (a - lambda))
        for phase in &e.eigenfunction {
            let t = phase.time();
            let want = (0.5 * (1.0 - (std::f64::consts::TAU * t).cos()) / std::f64::consts::TAU).exp();
            assert!((phase.values()[0] - want).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn fisher_speed_is_two() {
        let p = CellProblem::new(random_cell(0.05), DispersalSpec::Random, Coefficient::constant(1.0), periods()).unwrap();
        let s = variational_speed(&p, &[1.0], &SpeedOptions::default()).unwrap();
        assert!((s.c_star - 2.0).abs() < 1e-3);
        assert!((s.mu_star - 1.0).abs() < 1e-3);
        assert!((s.c_star - s.lambda_at_mu_star / s.mu_star).abs() < 1e-9);
    }

    #[test]
    fn lattice_speed_matches_symbol_minimum() {
        // min over mu of (2 cosh mu - 1) / mu on a dense grid (step 1e-6) near mu = 0.907
        let p = CellProblem::new(lattice_cell(), discrete(), Coefficient::constant(1.0), periods()).unwrap();
        let s = variational_speed(&p, &[1.0], &SpeedOptions::default()).unwrap();
        assert!((s.c_star - 2.073_444_684).abs() < 1e-7, "{}", s.c_star);
        assert!((s.mu_star - 0.9071).abs() < 1e-3);
    }

    #[test]
    fn nonlocal_bump_speed_matches_quadrature_oracle() {
        // c* = min_mu (sum_k w_k cosh(mu k h) - 1 + 1) / mu for the normalized bump weights,
        // evaluated independently on a fine mu grid
        let spec = DispersalSpec::Nonlocal {
            kernel: KernelSpec::bump(1.0).unwrap(),
        };
        let p = CellProblem::new(random_cell(0.1), spec, Coefficient::constant(1.0), periods()).unwrap();
        let s = variational_speed(&p, &[1.0], &SpeedOptions::default()).unwrap();
        assert!((s.c_star - 0.631_94).abs() < 1e-4, "{}", s.c_star);
        assert!((s.mu_star - 2.7045).abs() < 1e-2, "{}", s.mu_star);
    }

    #[test]
    fn decay_medium_is_degenerate() {
        let p = CellProblem::new(random_cell(0.1), DispersalSpec::Random, Coefficient::constant(-1.0), periods()).unwrap();
        assert!(matches!(
            variational_speed(&p, &[1.0], &SpeedOptions::default()),
            Err(KppError::DegenerateMedium { .. })
        ));
    }

    #[test]
    fn narrow_bracket_reports_edge() {
        let p = CellProblem::new(random_cell(0.1), DispersalSpec::Random, Coefficient::constant(1.0), periods()).unwrap();
        let opts = SpeedOptions {
            mu_min: 2.0,
            mu_max: 5.0,
            ..Default::default()
        };
        assert!(matches!(variational_speed(&p, &[1.0], &opts), Err(KppError::BracketEdge { .. })));
        let opts = SpeedOptions {
            mu_min: 0.01,
            mu_max: 0.5,
            ..Default::default()
        };
        assert!(matches!(variational_speed(&p, &[1.0], &opts), Err(KppError::BracketEdge { .. })));
    }

    #[test]
    fn nonlocal_speed_is_finite_and_symmetric() {
        let cell = random_cell(0.1);
        let spec = DispersalSpec::Nonlocal {
            kernel: KernelSpec::bump(1.0).unwrap(),
        };
        let p = CellProblem::new(cell, spec, Coefficient::constant(1.0), periods()).unwrap();
        let fwd = variational_speed(&p, &[1.0], &SpeedOptions::default()).unwrap();
        let bwd = variational_speed(&p, &[-1.0], &SpeedOptions::default()).unwrap();
        assert!((fwd.c_star - bwd.c_star).abs() < 1e-8);
        assert!(fwd.c_star > 0.0 && fwd.mu_star > 1.0);
    }
}
