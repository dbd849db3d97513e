//! Explicit time integration of `u_t = A u + u f(t, x, u)` on a truncated domain.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dispersal::{DispersalOperator, DispersalSpec};
use crate::domain::{Domain, Field, Point};
use crate::error::{KppError, Result};
use crate::reaction::{RateScratch, ReactionSpec, SampledReaction};

/// Negative values down to this floor are treated as roundoff and reset to zero.
pub const NEGATIVE_CLAMP: f64 = -1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    /// Fraction of the stability limit that `dt` may use, in `(0, 1]`.
    pub safety: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            scheme: Scheme::ExplicitEuler,
            dt: 1e-3,
            safety: 0.9,
        }
    }
}

impl IntegratorSpec {
    pub fn euler(dt: f64) -> Self {
        IntegratorSpec {
            scheme: Scheme::ExplicitEuler,
            dt,
            ..Default::default()
        }
    }

    pub fn rk4(dt: f64) -> Self {
        IntegratorSpec {
            scheme: Scheme::Rk4,
            dt,
            ..Default::default()
        }
    }
}

/// Snapshots `u(t, .)` in increasing time on one domain.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn new(snapshots: Vec<Field>) -> Result<Self> {
        if snapshots.windows(2).any(|w| !(w[1].time() > w[0].time())) {
            return Err(KppError::Precondition("snapshot times must increase strictly".into()));
        }
        if let Some(first) = snapshots.first() {
            for s in &snapshots[1..] {
                first.same_domain(s)?;
            }
        }
        Ok(Trajectory { snapshots })
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Field::time).collect()
    }

    fn push(&mut self, f: Field) {
        self.snapshots.push(f);
    }
}

#[derive(Debug, Clone, Default)]
struct Workspace {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    lin: Vec<f64>,
    rate: RateScratch,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            lin: vec![0.0; n],
            rate: RateScratch::default(),
        }
    }
}

/// A dispersal operator and a reaction prepared on one domain, plus the scheme.
#[derive(Debug, Clone)]
pub struct Model {
    domain: Arc<Domain>,
    operator: DispersalOperator,
    reaction: ReactionSpec,
    sampled: SampledReaction,
    integrator: IntegratorSpec,
    points: Vec<Point>,
}

/// Number of steps of size at most `dt` covering `span` exactly, and the step used.
pub fn steps_for(span: f64, dt: f64) -> (usize, f64) {
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

impl Model {
    pub fn new(
        domain: &Arc<Domain>,
        dispersal: &DispersalSpec,
        reaction: ReactionSpec,
        integrator: IntegratorSpec,
    ) -> Result<Self> {
        if !(integrator.dt > 0.0) || !integrator.dt.is_finite() {
            return Err(KppError::config("integrator.dt", "time step must be positive"));
        }
        if !(integrator.safety > 0.0 && integrator.safety <= 1.0) {
            return Err(KppError::config("integrator.safety", "safety factor must lie in (0, 1]"));
        }
        let rp = reaction.spatial_periods();
        for (axis, &p) in domain.spec().periods.iter().enumerate() {
            let q = rp[axis];
            let ratio = q / p;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(KppError::config(
                    "reaction.periods",
                    format!("reaction period {q} on axis {axis} is not a multiple of the domain period {p}"),
                ));
            }
        }
        let operator = DispersalOperator::new(dispersal, domain)?;
        let points: Vec<Point> = (0..domain.len()).map(|i| domain.coord(i)).collect();
        let sampled = SampledReaction::new(&reaction, &points);
        Ok(Model {
            domain: domain.clone(),
            operator,
            reaction,
            sampled,
            integrator,
            points,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    pub fn dispersal(&self) -> &DispersalSpec {
        self.operator.spec()
    }

    pub fn integrator(&self) -> &IntegratorSpec {
        &self.integrator
    }

    pub fn period(&self) -> f64 {
        self.reaction.period()
    }

    /// Same model with another reaction (for example the unperturbed reference).
    pub fn with_reaction(&self, reaction: ReactionSpec) -> Result<Model> {
        Model::new(&self.domain, self.operator.spec(), reaction, self.integrator)
    }

    pub fn with_integrator(&self, integrator: IntegratorSpec) -> Result<Model> {
        Model::new(&self.domain, self.operator.spec(), self.reaction.clone(), integrator)
    }

    /// Largest stable step for states bounded by `level`:
    /// `safety / (dispersal bound + max|f| + level * max b)`.
    ///
    /// For the explicit Euler scheme this makes the one-step map monotone.
    pub fn stability_limit(&self, level: f64) -> f64 {
        let bound = self.operator.stencil().bound() + self.reaction.stiffness(level, &self.points);
        self.integrator.safety / bound
    }

    fn check_step(&self, dt: f64, level: f64) -> Result<()> {
        let limit = self.stability_limit(level);
        if dt > limit * (1.0 + 1e-12) {
            return Err(KppError::Cfl { dt, limit });
        }
        Ok(())
    }

    /// `A u + u f(t, x, u)` into `out`.
    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64], lin: &mut Vec<f64>, rate: &mut RateScratch) {
        self.operator.apply_into(u, out);
        lin.resize(u.len(), 0.0);
        self.sampled.rate(t, u, lin, rate);
        for (o, l) in out.iter_mut().zip(lin.iter()) {
            *o += l;
        }
    }

    /// Evaluates the semi-discrete right-hand side at a field.
    pub fn rhs_field(&self, u: &Field) -> Result<Field> {
        let mut out = vec![0.0; u.values().len()];
        let mut ws = Workspace::new(0);
        self.rhs(u.time(), u.values(), &mut out, &mut ws.lin, &mut ws.rate);
        Field::new(u.domain().clone(), out, u.time())
    }

    fn advance(&self, u: &mut [f64], t: f64, dt: f64, ws: &mut Workspace) -> Result<()> {
        let Workspace { k, stage, lin, rate } = ws;
        match self.integrator.scheme {
            Scheme::ExplicitEuler => {
                self.rhs(t, u, &mut k[0], lin, rate);
                for (ui, ki) in u.iter_mut().zip(&k[0]) {
                    *ui += dt * ki;
                }
            }
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = k;
                self.rhs(t, u, k1, lin, rate);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k1.iter()) {
                    *s = ui + 0.5 * dt * ki;
                }
                self.rhs(t + 0.5 * dt, stage, k2, lin, rate);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k2.iter()) {
                    *s = ui + 0.5 * dt * ki;
                }
                self.rhs(t + 0.5 * dt, stage, k3, lin, rate);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k3.iter()) {
                    *s = ui + dt * ki;
                }
                self.rhs(t + dt, stage, k4, lin, rate);
                for i in 0..u.len() {
                    u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        for v in u.iter_mut() {
            if !v.is_finite() {
                return Err(KppError::BlowUp { time: t + dt });
            }
            if *v < 0.0 && *v >= NEGATIVE_CLAMP {
                *v = 0.0;
            }
        }
        Ok(())
    }

    /// One step of the configured scheme from time `t`.
    pub fn step(&self, u: &Field, t: f64) -> Result<Field> {
        self.same_domain(u)?;
        let level = u.sup_norm().max(self.reaction.m0());
        self.check_step(self.integrator.dt, level)?;
        let mut values = u.values().to_vec();
        let mut ws = Workspace::new(values.len());
        self.advance(&mut values, t, self.integrator.dt, &mut ws)?;
        Ok(Field::from_parts(self.domain.clone(), values, t + self.integrator.dt))
    }

    fn same_domain(&self, u: &Field) -> Result<()> {
        if **u.domain() != *self.domain {
            return Err(KppError::DomainMismatch("field lives on another domain".into()));
        }
        Ok(())
    }

    /// Integrates `n_steps` steps of size `dt` from `u0` at time `t0`, recording
    /// the initial field, every `record_every`-th step, and the final field.
    pub fn integrate(
        &self,
        u0: &Field,
        t0: f64,
        dt: f64,
        n_steps: usize,
        record_every: usize,
    ) -> Result<Trajectory> {
        self.same_domain(u0)?;
        if u0.min() < 0.0 {
            return Err(KppError::Precondition("initial data must be non-negative".into()));
        }
        let level = u0.sup_norm().max(self.reaction.m0());
        self.check_step(dt, level)?;
        let record_every = record_every.max(1);
        let mut u = u0.values().to_vec();
        let mut ws = Workspace::new(u.len());
        let mut traj = Trajectory::default();
        traj.push(Field::from_parts(self.domain.clone(), u.clone(), t0));
        for s in 0..n_steps {
            let t = t0 + s as f64 * dt;
            self.advance(&mut u, t, dt, &mut ws)?;
            let done = s + 1;
            if done % record_every == 0 || done == n_steps {
                traj.push(Field::from_parts(self.domain.clone(), u.clone(), t0 + done as f64 * dt));
            }
        }
        Ok(traj)
    }

    /// Solves on `[t_start, t_end]` with steps no larger than the configured `dt`.
    pub fn solve(&self, u0: &Field, t_start: f64, t_end: f64, record_every: usize) -> Result<Trajectory> {
        if !(t_end > t_start) {
            return Err(KppError::Precondition("t_end must exceed t_start".into()));
        }
        let (n, dt) = steps_for(t_end - t_start, self.integrator.dt);
        self.integrate(u0, t_start, dt, n, record_every)
    }

    /// Steps per temporal period, rounded up to a multiple of `phases`.
    pub fn steps_per_period(&self, phases: usize) -> usize {
        let phases = phases.max(1);
        let (n, _) = steps_for(self.period(), self.integrator.dt);
        n.div_ceil(phases) * phases
    }

    /// `u -> u(t0 + k T, .; u)`, the solution after `k_periods` temporal periods.
    pub fn period_map(&self, u: &Field, t0: f64, k_periods: usize) -> Result<Field> {
        let n = self.steps_per_period(1);
        let dt = self.period() / n as f64;
        let traj = self.integrate(u, t0, dt, n * k_periods.max(1), usize::MAX)?;
        Ok(traj.snapshots.into_iter().last().expect("final snapshot"))
    }
}

/// One step of `u_t = A u + u f` with freshly prepared operators.
pub fn step(
    u: &Field,
    t: f64,
    dispersal: &DispersalSpec,
    reaction: &ReactionSpec,
    integrator: &IntegratorSpec,
) -> Result<Field> {
    Model::new(u.domain(), dispersal, reaction.clone(), *integrator)?.step(u, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `u_t <= A u + u f`
    Sub,
    /// `u_t >= A u + u f`
    Super,
}

/// Worst signed violation of the sub/super-solution inequality over the
/// interior snapshots and buffer-protected points (positive means violated).
/// Time derivatives use centred differences between neighbouring snapshots.
pub fn residual_subsuper(model: &Model, candidate: &Trajectory, sense: Sense) -> Result<f64> {
    let snaps = candidate.snapshots();
    if snaps.len() < 3 {
        return Err(KppError::Precondition("need at least 3 snapshots".into()));
    }
    let d = model.domain();
    let mut worst = f64::NEG_INFINITY;
    for w in snaps.windows(3) {
        let (prev, cur, next) = (&w[0], &w[1], &w[2]);
        let rhs = model.rhs_field(cur)?;
        let span = next.time() - prev.time();
        for i in (0..d.len()).filter(|&i| d.is_protected(i)) {
            let ut = (next.values()[i] - prev.values()[i]) / span;
            let r = rhs.values()[i];
            let v = match sense {
                Sense::Super => r - ut,
                Sense::Sub => ut - r,
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Result of evolving an ordered pair of initial data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    /// `min` over recorded times and grid points of `u(t; u02) - u(t; u01)`.
    pub min_gap: f64,
    /// Same minimum restricted to the final time.
    pub final_min_gap: f64,
    pub pass: bool,
}

/// Ordering violations smaller than this are attributed to roundoff.
pub const ORDER_TOL: f64 = 1e-10;

pub fn comparison_harness(
    model: &Model,
    u01: &Field,
    u02: &Field,
    t_end: f64,
    record_every: usize,
) -> Result<OrderingReport> {
    u01.same_domain(u02)?;
    if u01.values().iter().zip(u02.values()).any(|(a, b)| a > b) {
        return Err(KppError::Precondition("initial data are not ordered (u01 <= u02)".into()));
    }
    let lo = model.solve(u01, 0.0, t_end, record_every)?;
    let hi = model.solve(u02, 0.0, t_end, record_every)?;
    let gap = |a: &Field, b: &Field| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| y - x)
            .fold(f64::INFINITY, f64::min)
    };
    let min_gap = lo
        .snapshots()
        .iter()
        .zip(hi.snapshots())
        .map(|(a, b)| gap(a, b))
        .fold(f64::INFINITY, f64::min);
    let final_min_gap = gap(lo.last().unwrap(), hi.last().unwrap());
    Ok(OrderingReport {
        min_gap,
        final_min_gap,
        pass: min_gap >= -ORDER_TOL,
    })
}
