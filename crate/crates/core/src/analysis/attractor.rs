use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{part_metric, MONOTONE_TOL};
use crate::domain::Field;
use crate::error::{KppError, Result};
use crate::evolve::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttractorOptions {
    /// Stop when `|| u_{n+1} - u_n ||_inf < tol`.
    pub tol: f64,
    pub max_periods: usize,
    /// Number of stored phases of the limit over one period.
    pub phases: usize,
    /// Sup norm below which the iteration is declared extinct.
    pub extinction: f64,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        AttractorOptions {
            tol: 1e-8,
            max_periods: 2000,
            phases: 8,
            extinction: 1e-6,
        }
    }
}

/// The time-periodic strictly positive solution reached from one start.
#[derive(Debug, Clone)]
pub struct AttractorResult {
    /// `u*(k T / n_t, .)` for `k = 0..n_t`.
    pub phases: Vec<Field>,
    /// `|| u_{n+1} - u_n ||_inf` per period.
    pub sup_deltas: Vec<f64>,
    /// `rho(u_n, u_{n+1})` per period; nonincreasing along the flow.
    pub part_deltas: Vec<f64>,
    pub iterations: usize,
    /// `|| Phi(u*) - u* ||_inf` of the stored limit.
    pub fixed_point_residual: f64,
}

impl AttractorResult {
    pub fn period(&self) -> f64 {
        self.phases[1.min(self.phases.len() - 1)].time() * self.phases.len() as f64
    }

    /// Smallest value over the cell and all stored phases.
    pub fn min(&self) -> f64 {
        self.phases.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.phases.iter().map(Field::max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest increase of the part-metric history.
    pub fn part_metric_violation(&self) -> f64 {
        self.part_deltas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u*(t, .)`, linear in time between stored phases.
    pub fn at_time(&self, t: f64, period: f64) -> Result<Field> {
        let n = self.phases.len();
        let pos = t.rem_euclid(period) / period * n as f64;
        let k = (pos.floor() as usize).min(n - 1);
        let w = pos - k as f64;
        let (a, b) = (&self.phases[k], &self.phases[(k + 1) % n]);
        let values = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect();
        Field::new(a.domain().clone(), values, t)
    }
}

fn sup_delta(u: &Field, v: &Field) -> f64 {
    u.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Iterates the period map from a strictly positive start until it settles.
pub fn find_attractor(model: &Model, start: &Field, opts: &AttractorOptions) -> Result<AttractorResult> {
    if !(start.min() > 0.0) {
        return Err(KppError::Precondition("attractor start must be strictly positive".into()));
    }
    let phases = opts.phases.max(1);
    let n = model.steps_per_period(phases);
    let dt = model.period() / n as f64;
    let map = |u: &Field| -> Result<Field> {
        let traj = model.integrate(u, 0.0, dt, n, usize::MAX)?;
        Ok(traj.last().expect("final snapshot").clone().with_time(0.0))
    };
    let mut u = start.clone().with_time(0.0);
    let mut sup_deltas = Vec::new();
    let mut part_deltas = Vec::new();
    let mut converged = false;
    for period in 0..opts.max_periods {
        let next = map(&u)?;
        if next.sup_norm() < opts.extinction {
            return Err(KppError::Extinction { period: period + 1 });
        }
        sup_deltas.push(sup_delta(&u, &next));
        part_deltas.push(part_metric(&u, &next)?);
        u = next;
        if *sup_deltas.last().unwrap() < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KppError::NonConvergence {
            iterations: sup_deltas.len(),
            spread: sup_deltas.last().copied().unwrap_or(f64::NAN),
        });
    }
    let traj = model.integrate(&u, 0.0, dt, n, n / phases)?;
    let snaps = traj.snapshots();
    let fixed_point_residual = sup_delta(&snaps[0], &snaps[phases]);
    let result = AttractorResult {
        phases: snaps[..phases].to_vec(),
        iterations: sup_deltas.len(),
        sup_deltas,
        part_deltas,
        fixed_point_residual,
    };
    if !(result.min() > 0.0) {
        return Err(KppError::Extinction {
            period: result.iterations,
        });
    }
    Ok(result)
}

/// Starts from the constant `m`, which must dominate the supersolution level `M0`.
pub fn find_attractor_from_constant(model: &Model, m: f64, opts: &AttractorOptions) -> Result<AttractorResult> {
    let m0 = model.reaction().m0();
    if !(m >= m0) {
        return Err(KppError::Precondition(format!(
            "constant start {m} is below the supersolution level M0 = {m0}"
        )));
    }
    find_attractor(model, &Field::constant(model.domain().clone(), m), opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistance {
    pub first: usize,
    pub second: usize,
    /// Max over stored phases of the sup-norm distance.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleReport {
    pub distances: Vec<PairDistance>,
    pub max_distance: f64,
    pub threshold: f64,
    pub iterations: Vec<usize>,
    pub fixed_point_residuals: Vec<f64>,
    /// Largest increase in any part-metric history.
    pub part_metric_violation: f64,
    pub pass: bool,
}

/// Runs the attractor iteration from every start and compares the limits phase by phase.
pub fn liouville_check(model: &Model, starts: &[Field], opts: &AttractorOptions) -> Result<(LiouvilleReport, Vec<AttractorResult>)> {
    if starts.len() < 2 {
        return Err(KppError::Precondition("uniqueness check needs at least two starts".into()));
    }
    let results: Vec<AttractorResult> = starts
        .par_iter()
        .map(|s| find_attractor(model, s, opts))
        .collect::<Result<_>>()?;
    let mut distances = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let distance = results[i]
                .phases
                .iter()
                .zip(&results[j].phases)
                .map(|(a, b)| sup_delta(a, b))
                .fold(0.0, f64::max);
            distances.push(PairDistance {
                first: i,
                second: j,
                distance,
            });
        }
    }
    let max_distance = distances.iter().map(|d| d.distance).fold(0.0, f64::max);
    let part_metric_violation = results
        .iter()
        .map(AttractorResult::part_metric_violation)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = 10.0 * opts.tol;
    let report = LiouvilleReport {
        distances,
        max_distance,
        threshold,
        iterations: results.iter().map(|r| r.iterations).collect(),
        fixed_point_residuals: results.iter().map(|r| r.fixed_point_residual).collect(),
        part_metric_violation,
        pass: max_distance < threshold && part_metric_violation <= MONOTONE_TOL,
    };
    Ok((report, results))
}
