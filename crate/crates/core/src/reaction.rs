//! KPP nonlinearities `f(t, x, u) = f0(t, x, u) + localized perturbation`
//! and sampled checks of the structural hypotheses.
//!
//! The canonical form is logistic, `f = r0(t,x) + dr(x) - b(t,x) u`, with
//! `r0` and `b` periodic in time and space and `dr` decaying at infinity.
//! Construction rejects `b_min <= 0`, so the negative-slope requirement is
//! an invariant of the type rather than a sampled property.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{norm, Cell, Domain, Point};
use crate::error::{KppError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    #[default]
    Cos,
    Sin,
}

/// `amplitude * trig(2 pi (time * t / T + sum_i space_i * x_i / p_i) + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub amplitude: f64,
    #[serde(default)]
    pub time: i32,
    #[serde(default)]
    pub space: [i32; 2],
    #[serde(default)]
    pub trig: Trig,
    #[serde(default)]
    pub phase: f64,
}

/// A coefficient periodic in time (period `T`) and space (periods `p_i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    Fourier {
        mean: f64,
        terms: Vec<FourierTerm>,
    },
    /// Cell values at `n` equally spaced time slabs `k T / n`, interpolated
    /// linearly in time (wrapping from the last slab to the first).
    Table {
        cell: Cell,
        slabs: Vec<Vec<f64>>,
    },
}

/// Temporal and spatial periods shared by the coefficients of one medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periods {
    pub time: f64,
    pub space: Point,
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    /// `mean + amplitude * sin(2 pi t / T)`.
    pub fn time_sine(mean: f64, amplitude: f64) -> Self {
        Coefficient::Fourier {
            mean,
            terms: vec![FourierTerm {
                amplitude,
                time: 1,
                space: [0, 0],
                trig: Trig::Sin,
                phase: 0.0,
            }],
        }
    }

    /// `mean + amplitude * cos(2 pi x / p)` along axis 0.
    pub fn space_cosine(mean: f64, amplitude: f64) -> Self {
        Coefficient::Fourier {
            mean,
            terms: vec![FourierTerm {
                amplitude,
                time: 0,
                space: [1, 0],
                trig: Trig::Cos,
                phase: 0.0,
            }],
        }
    }

    pub fn table(cell: Cell, slabs: Vec<Vec<f64>>) -> Result<Self> {
        if slabs.is_empty() || slabs.iter().any(|s| s.len() != cell.len()) {
            return Err(KppError::config(
                "reaction.table",
                format!("every slab needs {} cell values", cell.len()),
            ));
        }
        if slabs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KppError::config("reaction.table", "non-finite entry"));
        }
        Ok(Coefficient::Table { cell, slabs })
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Coefficient::Constant { .. } => true,
            Coefficient::Fourier { terms, .. } => terms.iter().all(|t| t.time == 0),
            Coefficient::Table { slabs, .. } => slabs.len() == 1,
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Fourier { mean, terms } => {
                mean + terms.iter().map(|t| t.amplitude.abs()).sum::<f64>()
            }
            Coefficient::Table { slabs, .. } => {
                slabs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Fourier { mean, terms } => {
                mean - terms.iter().map(|t| t.amplitude.abs()).sum::<f64>()
            }
            Coefficient::Table { slabs, .. } => {
                slabs.iter().flatten().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn eval(&self, periods: &Periods, t: f64, x: Point) -> f64 {
        let tau = t.rem_euclid(periods.time);
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Fourier { mean, terms } => {
                let mut acc = *mean;
                for term in terms {
                    let angle = time_angle(term, tau, periods.time) + space_angle(term, x, periods);
                    acc += term.amplitude
                        * match term.trig {
                            Trig::Cos => angle.cos(),
                            Trig::Sin => angle.sin(),
                        };
                }
                acc
            }
            Coefficient::Table { cell, slabs } => {
                let j = table_index(cell, x);
                let (k0, k1, w) = slab_weights(slabs.len(), tau, periods.time);
                slabs[k0][j] + w * (slabs[k1][j] - slabs[k0][j])
            }
        }
    }
}

fn time_angle(term: &FourierTerm, tau: f64, period: f64) -> f64 {
    TAU * term.time as f64 * tau / period
}

fn space_angle(term: &FourierTerm, x: Point, periods: &Periods) -> f64 {
    let mut a = term.phase;
    for axis in 0..2 {
        if term.space[axis] != 0 {
            a += TAU * term.space[axis] as f64 * x[axis] / periods.space[axis];
        }
    }
    a
}

fn table_index(cell: &Cell, x: Point) -> usize {
    let c = cell.counts();
    let j0 = (x[0] / cell.spacing()).round() as i64;
    let j1 = (x[1] / cell.spacing()).round() as i64;
    (j0.rem_euclid(c[0] as i64) as usize) * c[1] + j1.rem_euclid(c[1] as i64) as usize
}

fn slab_weights(n: usize, tau: f64, period: f64) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let s = tau / period * n as f64;
    let k0 = (s.floor() as usize).min(n - 1);
    (k0, (k0 + 1) % n, s - k0 as f64)
}

/// A coefficient pre-evaluated at a fixed list of points so that the time
/// dependence costs one `sin`/`cos` pair per Fourier term per call.
#[derive(Debug, Clone)]
pub(crate) struct SampledCoefficient {
    periods: Periods,
    kind: Sampled,
}

#[derive(Debug, Clone)]
enum Sampled {
    Static(Vec<f64>),
    Fourier {
        mean: f64,
        // per time-dependent term: (amplitude, time harmonic, trig, cos beta, sin beta)
        moving: Vec<(f64, i32, Trig, Vec<f64>, Vec<f64>)>,
        fixed: Vec<f64>,
    },
    Table {
        slabs: Vec<Vec<f64>>,
    },
}

impl SampledCoefficient {
    pub(crate) fn new(coef: &Coefficient, periods: Periods, points: &[Point]) -> Self {
        let kind = match coef {
            c if c.is_time_independent() => {
                Sampled::Static(points.iter().map(|&x| c.eval(&periods, 0.0, x)).collect())
            }
            Coefficient::Fourier { mean, terms } => {
                let mut fixed = vec![0.0; points.len()];
                let mut moving = Vec::new();
                for term in terms {
                    if term.time == 0 {
                        for (f, &x) in fixed.iter_mut().zip(points) {
                            let a = space_angle(term, x, &periods);
                            *f += term.amplitude
                                * match term.trig {
                                    Trig::Cos => a.cos(),
                                    Trig::Sin => a.sin(),
                                };
                        }
                    } else {
                        let beta: Vec<f64> =
                            points.iter().map(|&x| space_angle(term, x, &periods)).collect();
                        moving.push((
                            term.amplitude,
                            term.time,
                            term.trig,
                            beta.iter().map(|b| b.cos()).collect(),
                            beta.iter().map(|b| b.sin()).collect(),
                        ));
                    }
                }
                Sampled::Fourier {
                    mean: *mean,
                    moving,
                    fixed,
                }
            }
            Coefficient::Table { cell, slabs } => {
                let idx: Vec<usize> = points.iter().map(|&x| table_index(cell, x)).collect();
                Sampled::Table {
                    slabs: slabs
                        .iter()
                        .map(|s| idx.iter().map(|&j| s[j]).collect())
                        .collect(),
                }
            }
            Coefficient::Constant { .. } => unreachable!("constants are time independent"),
        };
        SampledCoefficient { periods, kind }
    }

    /// Writes the coefficient at time `t` into `out`.
    pub(crate) fn fill(&self, t: f64, out: &mut [f64]) {
        let tau = t.rem_euclid(self.periods.time);
        match &self.kind {
            Sampled::Static(v) => out.copy_from_slice(v),
            Sampled::Fourier {
                mean,
                moving,
                fixed,
            } => {
                for (o, f) in out.iter_mut().zip(fixed) {
                    *o = mean + f;
                }
                for (amp, k, trig, cb, sb) in moving {
                    let alpha = TAU * *k as f64 * tau / self.periods.time;
                    let (sa, ca) = alpha.sin_cos();
                    for ((o, c), s) in out.iter_mut().zip(cb).zip(sb) {
                        *o += amp
                            * match trig {
                                Trig::Cos => ca * c - sa * s,
                                Trig::Sin => sa * c + ca * s,
                            };
                    }
                }
            }
            Sampled::Table { slabs } => {
                let (k0, k1, w) = slab_weights(slabs.len(), tau, self.periods.time);
                for ((o, a), b) in out.iter_mut().zip(&slabs[k0]).zip(&slabs[k1]) {
                    *o = a + w * (b - a);
                }
            }
        }
    }
}

/// Localized, time-independent perturbation `dr(x)` of the growth rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// `amplitude * exp(1 - 1/(1 - (|x|/radius)^2))` on `|x| < radius`; peak value `amplitude`.
    Bump { amplitude: f64, radius: f64 },
    /// `amplitude * exp(-rate |x|^2)`.
    Gaussian { amplitude: f64, rate: f64 },
    /// `amplitude * exp(-rate |x|)`.
    Exponential { amplitude: f64, rate: f64 },
    /// Does not decay; only useful as a negative control for the decay check.
    Constant { amplitude: f64 },
    /// Piecewise-linear radial table; constant past the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl Perturbation {
    pub fn eval(&self, x: Point) -> f64 {
        let r = norm(x);
        match *self {
            Perturbation::None => 0.0,
            Perturbation::Bump { amplitude, radius } => {
                if r >= radius {
                    0.0
                } else {
                    let s = r / radius;
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            Perturbation::Gaussian { amplitude, rate } => amplitude * (-rate * r * r).exp(),
            Perturbation::Exponential { amplitude, rate } => amplitude * (-rate * r).exp(),
            Perturbation::Constant { amplitude } => amplitude,
            Perturbation::Table {
                ref radii,
                ref values,
            } => {
                let last = radii.len() - 1;
                if r >= radii[last] {
                    return values[last];
                }
                let k = radii.partition_point(|&q| q <= r).max(1) - 1;
                let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    /// Upper bound of `dr` over space.
    pub fn max_value(&self) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Bump { amplitude, .. }
            | Perturbation::Gaussian { amplitude, .. }
            | Perturbation::Exponential { amplitude, .. } => amplitude.max(0.0),
            Perturbation::Constant { amplitude } => *amplitude,
            Perturbation::Table { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KppError::config("reaction.perturbation", m.to_string()));
        match self {
            Perturbation::Bump { radius, .. } if !(*radius > 0.0) => bad("bump radius must be positive"),
            Perturbation::Gaussian { rate, .. } | Perturbation::Exponential { rate, .. }
                if !(*rate > 0.0) =>
            {
                bad("decay rate must be positive")
            }
            Perturbation::Table { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() || radii[0] != 0.0 {
                    bad("table needs matching radii/values starting at radius 0")
                } else if radii.windows(2).any(|w| !(w[1] > w[0])) {
                    bad("radii must be strictly increasing")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Logistic KPP data `r0 + dr - b u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricKpp {
    pub r0: Coefficient,
    pub b: Coefficient,
    #[serde(default = "no_perturbation")]
    pub perturbation: Perturbation,
}

fn no_perturbation() -> Perturbation {
    Perturbation::None
}

pub type ScalarFn = Arc<dyn Fn(f64, Point, f64) -> f64 + Send + Sync>;

/// A user-supplied nonlinearity; hypotheses are only sampled, never proven.
#[derive(Clone)]
pub struct CustomReaction {
    pub f: ScalarFn,
    pub f0: ScalarFn,
    pub df_du: Option<ScalarFn>,
}

impl fmt::Debug for CustomReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomReaction")
            .field("df_du", &self.df_du.is_some())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ReactionForm {
    Kpp(ParametricKpp),
    Custom(CustomReaction),
}

#[derive(Debug, Clone)]
pub struct ReactionSpec {
    form: ReactionForm,
    periods: Periods,
    m0: f64,
}

fn periods_from(period: f64, spatial_periods: &[f64]) -> Result<Periods> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(KppError::config("reaction.period", "temporal period must be positive"));
    }
    if spatial_periods.is_empty() || spatial_periods.len() > 2 || spatial_periods.iter().any(|p| !(*p > 0.0)) {
        return Err(KppError::config("reaction.periods", "need 1 or 2 positive spatial periods"));
    }
    let mut space = [1.0; 2];
    space[..spatial_periods.len()].copy_from_slice(spatial_periods);
    Ok(Periods {
        time: period,
        space,
    })
}

impl ReactionSpec {
    pub fn kpp(kpp: ParametricKpp, period: f64, spatial_periods: &[f64]) -> Result<Self> {
        let periods = periods_from(period, spatial_periods)?;
        kpp.perturbation.validate()?;
        let b_min = kpp.b.min_value();
        if !(b_min > 0.0) {
            return Err(KppError::Hypothesis {
                hypothesis: "H0",
                message: format!(
                    "b_min = {b_min} must be > 0 so that f decreases in u and is negative for large u"
                ),
            });
        }
        let top = kpp.r0.max_value() + kpp.perturbation.max_value();
        if !top.is_finite() {
            return Err(KppError::config("reaction.r0", "coefficients must be finite"));
        }
        let m0 = top.max(0.0) / b_min + 1.0;
        Ok(ReactionSpec {
            form: ReactionForm::Kpp(kpp),
            periods,
            m0,
        })
    }

    /// Fisher-KPP, `f(u) = 1 - u`.
    pub fn fisher() -> Self {
        ReactionSpec::kpp(
            ParametricKpp {
                r0: Coefficient::constant(1.0),
                b: Coefficient::constant(1.0),
                perturbation: Perturbation::None,
            },
            1.0,
            &[1.0],
        )
        .expect("valid")
    }

    pub fn custom(
        reaction: CustomReaction,
        period: f64,
        spatial_periods: &[f64],
        m0: f64,
    ) -> Result<Self> {
        if !(m0 > 0.0) {
            return Err(KppError::config("reaction.m0", "M0 must be positive"));
        }
        Ok(ReactionSpec {
            form: ReactionForm::Custom(reaction),
            periods: periods_from(period, spatial_periods)?,
            m0,
        })
    }

    /// Replaces the declared level above which `f < 0`; [`check_h0`] reveals a bad choice.
    pub fn with_m0(mut self, m0: f64) -> Self {
        self.m0 = m0;
        self
    }

    /// Same medium with the perturbation removed (the periodic reference `f0`).
    pub fn reference(&self) -> Self {
        match &self.form {
            ReactionForm::Kpp(k) => {
                let mut k = k.clone();
                k.perturbation = Perturbation::None;
                let mut spec = ReactionSpec::kpp(k, self.periods.time, &self.spatial_periods()).expect("validated");
                spec.m0 = self.m0;
                spec
            }
            ReactionForm::Custom(c) => {
                let mut c = c.clone();
                c.f = c.f0.clone();
                ReactionSpec {
                    form: ReactionForm::Custom(c),
                    ..self.clone()
                }
            }
        }
    }

    pub fn form(&self) -> &ReactionForm {
        &self.form
    }

    pub fn period(&self) -> f64 {
        self.periods.time
    }

    pub fn periods(&self) -> Periods {
        self.periods
    }

    pub fn spatial_periods(&self) -> Vec<f64> {
        self.periods.space.to_vec()
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn eval_f0(&self, t: f64, x: Point, u: f64) -> f64 {
        match &self.form {
            ReactionForm::Kpp(k) => k.r0.eval(&self.periods, t, x) - k.b.eval(&self.periods, t, x) * u,
            ReactionForm::Custom(c) => (c.f0)(t, x, u),
        }
    }

    /// Bound on `|f|` for `0 <= u <= level` plus `level * max |f_u|`, used by the step-size check.
    pub(crate) fn stiffness(&self, level: f64, points: &[Point]) -> f64 {
        match &self.form {
            ReactionForm::Kpp(k) => {
                let r_abs = (k.r0.max_value() + k.perturbation.max_value())
                    .abs()
                    .max((k.r0.min_value() - perturbation_floor(&k.perturbation)).abs());
                r_abs + 2.0 * level * k.b.max_value()
            }
            ReactionForm::Custom(_) => {
                let mut worst = 0.0f64;
                let n_t = 8;
                for it in 0..n_t {
                    let t = self.periods.time * it as f64 / n_t as f64;
                    for &x in points.iter().step_by((points.len() / 64).max(1)) {
                        for iu in 0..=8 {
                            let u = level * iu as f64 / 8.0;
                            let fu = derivative_u(self, t, x, u).0;
                            worst = worst.max(eval_f(self, t, x, u).abs() + level * fu.abs());
                        }
                    }
                }
                worst
            }
        }
    }
}

fn perturbation_floor(p: &Perturbation) -> f64 {
    match p {
        Perturbation::Bump { amplitude, .. }
        | Perturbation::Gaussian { amplitude, .. }
        | Perturbation::Exponential { amplitude, .. }
        | Perturbation::Constant { amplitude } => amplitude.min(0.0),
        Perturbation::Table { values, .. } => values.iter().copied().fold(0.0, f64::min),
        Perturbation::None => 0.0,
    }
}

/// `f(t, x, u)`.
pub fn eval_f(spec: &ReactionSpec, t: f64, x: Point, u: f64) -> f64 {
    match &spec.form {
        ReactionForm::Kpp(k) => {
            k.r0.eval(&spec.periods, t, x) + k.perturbation.eval(x) - k.b.eval(&spec.periods, t, x) * u
        }
        ReactionForm::Custom(c) => (c.f)(t, x, u),
    }
}

/// Step used for central-difference estimates of `f_u` on custom reactions.
const FD_STEP: f64 = 1e-5;

/// `(f_u, estimated)`.
fn derivative_u(spec: &ReactionSpec, t: f64, x: Point, u: f64) -> (f64, bool) {
    match &spec.form {
        ReactionForm::Kpp(k) => (-k.b.eval(&spec.periods, t, x), false),
        ReactionForm::Custom(c) => match &c.df_du {
            Some(d) => (d(t, x, u), false),
            None => (((c.f)(t, x, u + FD_STEP) - (c.f)(t, x, u - FD_STEP)) / (2.0 * FD_STEP), true),
        },
    }
}

/// The periodic linearization `a0(t, x) = f0(t, x, 0)` on a cell.
///
/// Logistic media return `r0` itself; custom reactions are tabulated on the
/// cell at `n_slabs` equally spaced times.
pub fn linearize_at_zero(spec: &ReactionSpec, cell: &Cell, n_slabs: usize) -> Result<Coefficient> {
    match &spec.form {
        ReactionForm::Kpp(k) => Ok(k.r0.clone()),
        ReactionForm::Custom(_) => {
            let n = n_slabs.max(1);
            let slabs = (0..n)
                .map(|k| {
                    let t = spec.period() * k as f64 / n as f64;
                    (0..cell.len()).map(|j| spec.eval_f0(t, cell.coord(j), 0.0)).collect()
                })
                .collect();
            Coefficient::table(cell.clone(), slabs)
        }
    }
}

/// Violations of one clause on the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseReport {
    pub clause: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest sampled value of the quantity that must stay negative.
    pub worst: f64,
    pub estimated: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub hypothesis: &'static str,
    pub sampling: String,
    pub clauses: Vec<ClauseReport>,
    /// For the decay check: `(r, sup_{|x| >= r} |f - f0|)`.
    pub gaps: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Resolution of the `(t, x, u)` sample used by [`check_h0`].
#[derive(Debug, Clone)]
pub struct Sampling {
    pub points: Vec<Point>,
    pub n_t: usize,
    pub n_u: usize,
    /// Samples `u` up to `M0 + margin`.
    pub margin: f64,
}

impl Sampling {
    pub fn over_domain(domain: &Domain, n_t: usize, n_u: usize) -> Self {
        Sampling {
            points: (0..domain.len()).map(|i| domain.coord(i)).collect(),
            n_t,
            n_u,
            margin: 1.0,
        }
    }
}

/// Samples the negativity and monotonicity clauses.
pub fn check_h0(spec: &ReactionSpec, sampling: &Sampling) -> HypothesisReport {
    let m0 = spec.m0();
    let top = m0 + sampling.margin;
    let n_t = sampling.n_t.max(1);
    let n_u = sampling.n_u.max(2);
    let mut above = ClauseReport {
        clause: "f < 0 for u >= M0".into(),
        samples: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
        estimated: false,
        note: None,
    };
    let mut slope = ClauseReport {
        clause: "f_u < 0".into(),
        samples: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
        estimated: false,
        note: None,
    };
    for it in 0..n_t {
        let t = spec.period() * it as f64 / n_t as f64;
        for &x in &sampling.points {
            for iu in 0..n_u {
                let s = iu as f64 / (n_u - 1) as f64;
                let u = m0 + s * sampling.margin;
                let f = eval_f(spec, t, x, u);
                above.samples += 1;
                above.worst = above.worst.max(f);
                if !(f < 0.0) {
                    above.violations += 1;
                }
                let u = s * top;
                let (fu, est) = derivative_u(spec, t, x, u);
                slope.samples += 1;
                slope.estimated |= est;
                slope.worst = slope.worst.max(fu);
                if !(fu < 0.0) {
                    slope.violations += 1;
                }
            }
        }
    }
    let mut clauses = vec![above, slope];
    if let ReactionForm::Custom(_) = spec.form {
        clauses.push(ClauseReport {
            clause: "f, f_t, f_u uniformly continuous".into(),
            samples: 0,
            violations: 0,
            worst: f64::NAN,
            estimated: false,
            note: Some("declared, not checked".into()),
        });
    }
    let pass = clauses.iter().all(|c| c.violations == 0);
    HypothesisReport {
        hypothesis: "H0",
        sampling: format!(
            "{} times x {} points x {} levels, u in [0, {}]",
            n_t,
            sampling.points.len(),
            n_u,
            top
        ),
        clauses,
        gaps: Vec::new(),
        pass,
    }
}

/// Samples the decay of `f - f0` at the grid points of `domain`.
///
/// For each radius the gap is the sup over `|x| >= r`, `t in [0, T]` and
/// `u in [0, M0 + 1]`. Passes when the gaps never increase and the last one
/// is below `tol`.
pub fn check_h1(
    spec: &ReactionSpec,
    domain: &Domain,
    radii: &[f64],
    n_t: usize,
    n_u: usize,
    tol: f64,
) -> Result<HypothesisReport> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KppError::Precondition("radii must be increasing".into()));
    }
    let n_t = n_t.max(1);
    let n_u = n_u.max(2);
    let top = spec.m0() + 1.0;
    // sup over (t, u) at each point, then sup over the region
    let point_gap: Vec<(f64, f64)> = (0..domain.len())
        .map(|i| {
            let x = domain.coord(i);
            let mut g = 0.0f64;
            for it in 0..n_t {
                let t = spec.period() * it as f64 / n_t as f64;
                for iu in 0..n_u {
                    let u = top * iu as f64 / (n_u - 1) as f64;
                    g = g.max((eval_f(spec, t, x, u) - spec.eval_f0(t, x, u)).abs());
                }
            }
            (norm(x), g)
        })
        .collect();
    let mut gaps = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut hit = false;
        let mut g = 0.0f64;
        for &(dist, pg) in &point_gap {
            if dist >= r - 1e-12 {
                hit = true;
                g = g.max(pg);
            }
        }
        if !hit {
            return Err(KppError::EmptyRegion(format!("no grid point with |x| >= {r}")));
        }
        gaps.push((r, g));
    }
    let monotone = gaps.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = gaps.last().map_or(0.0, |g| g.1);
    let pass = monotone && last < tol;
    Ok(HypothesisReport {
        hypothesis: "H1",
        sampling: format!("{} times x {} levels on {}", n_t, n_u, domain),
        clauses: vec![ClauseReport {
            clause: "|f - f0| -> 0 as |x| -> infinity".into(),
            samples: point_gap.len() * n_t * n_u,
            violations: usize::from(!pass),
            worst: last,
            estimated: false,
            note: None,
        }],
        gaps,
        pass,
    })
}

/// Reaction data pre-evaluated on a fixed set of points.
#[derive(Debug, Clone)]
pub(crate) struct SampledReaction {
    kind: SampledKind,
}

#[derive(Debug, Clone)]
enum SampledKind {
    Kpp {
        r: SampledCoefficient,
        b: SampledCoefficient,
        dr: Vec<f64>,
    },
    Custom {
        spec: ReactionSpec,
        points: Vec<Point>,
    },
}

/// Scratch buffers for [`SampledReaction::rate`].
#[derive(Debug, Clone, Default)]
pub(crate) struct RateScratch {
    r: Vec<f64>,
    b: Vec<f64>,
}

impl SampledReaction {
    pub(crate) fn new(spec: &ReactionSpec, points: &[Point]) -> Self {
        let kind = match &spec.form {
            ReactionForm::Kpp(k) => SampledKind::Kpp {
                r: SampledCoefficient::new(&k.r0, spec.periods, points),
                b: SampledCoefficient::new(&k.b, spec.periods, points),
                dr: points.iter().map(|&x| k.perturbation.eval(x)).collect(),
            },
            ReactionForm::Custom(_) => SampledKind::Custom {
                spec: spec.clone(),
                points: points.to_vec(),
            },
        };
        SampledReaction { kind }
    }

    /// Writes `u * f(t, x, u)` into `out`.
    pub(crate) fn rate(&self, t: f64, u: &[f64], out: &mut [f64], scratch: &mut RateScratch) {
        match &self.kind {
            SampledKind::Kpp { r, b, dr } => {
                let n = u.len();
                scratch.r.resize(n, 0.0);
                scratch.b.resize(n, 0.0);
                r.fill(t, &mut scratch.r);
                b.fill(t, &mut scratch.b);
                for i in 0..n {
                    out[i] = u[i] * (scratch.r[i] + dr[i] - scratch.b[i] * u[i]);
                }
            }
            SampledKind::Custom { spec, points } => {
                for ((o, &ui), &x) in out.iter_mut().zip(u).zip(points) {
                    *o = ui * eval_f(spec, t, x, ui);
                }
            }
        }
    }
}
