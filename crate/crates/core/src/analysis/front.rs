use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::attractor::AttractorResult;
use crate::domain::{dot, Domain, Field, Point};
use crate::error::{KppError, Result};
use crate::evolve::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontProfile {
    /// `delta0` for `x.xi < offset`, zero beyond.
    Step,
    /// `delta0` for `x.xi <= offset - 1`, zero for `x.xi >= offset`, smooth and monotone between.
    Psi0,
}

fn smooth_unit_step(s: f64) -> f64 {
    // 1 for s <= -1, 0 for s >= 0
    let g = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (g(-s), g(1.0 + s));
    a / (a + b)
}

/// Front-like initial data: positive behind `offset` along `xi`, exactly zero ahead.
pub fn make_front_profile(domain: &Arc<Domain>, xi: Point, kind: FrontProfile, offset: f64, delta0: f64) -> Result<Field> {
    if !(delta0 > 0.0) {
        return Err(KppError::Precondition("front height must be positive".into()));
    }
    Field::from_fn(domain.clone(), |x| {
        let s = dot(x, xi) - offset;
        delta0
            * match kind {
                FrontProfile::Step => (s < 0.0) as u8 as f64,
                FrontProfile::Psi0 => smooth_unit_step(s),
            }
    })
}

/// Half the smallest value of the reference attractor.
pub fn default_front_height(u0_star: &AttractorResult) -> f64 {
    0.5 * u0_star.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontOptions {
    /// Leading fraction of snapshots excluded from the regression.
    pub transient: f64,
    /// Distance from the far face at which the front counts as escaped; the
    /// domain buffer is used when larger.
    pub margin: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            transient: 0.2,
            margin: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontRecord {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub level: f64,
    /// `[t_first, t_last]` of the regression window.
    pub window: (f64, f64),
    pub speed: f64,
    pub stderr: f64,
}

/// Points grouped by their projection on `xi`, each group carrying its smallest value.
struct Projection {
    coords: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Projection {
    fn new(domain: &Domain, xi: Point) -> Self {
        let mut idx: Vec<(f64, usize)> = (0..domain.len()).map(|i| (dot(domain.coord(i), xi), i)).collect();
        idx.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-9 * domain.spacing();
        let mut coords: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (s, i) in idx {
            match coords.last() {
                Some(&c) if (s - c).abs() <= tol => members.last_mut().unwrap().push(i),
                _ => {
                    coords.push(s);
                    members.push(vec![i]);
                }
            }
        }
        Projection { coords, members }
    }

    fn profile(&self, u: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Leading level crossing along `xi`: the last group at or above `level`,
/// interpolated linearly with the group ahead of it.
fn crossing(proj: &Projection, u: &[f64], level: f64, time: f64) -> Result<Option<f64>> {
    let prof = proj.profile(u);
    let Some(k) = prof.iter().rposition(|&v| v >= level) else {
        return Ok(None);
    };
    if k + 1 == prof.len() {
        return Err(KppError::FrontEscaped { time });
    }
    let (s0, s1) = (proj.coords[k], proj.coords[k + 1]);
    let (v0, v1) = (prof[k], prof[k + 1]);
    Ok(Some(s0 + (v0 - level) / (v0 - v1) * (s1 - s0)))
}

fn regression(t: &[f64], s: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let sm = s.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    let sts: f64 = t.iter().zip(s).map(|(x, y)| (x - tm) * (y - sm)).sum();
    let slope = sts / stt;
    let rss: f64 = t
        .iter()
        .zip(s)
        .map(|(x, y)| (y - sm - slope * (x - tm)).powi(2))
        .sum();
    let stderr = if t.len() > 2 {
        (rss / (n - 2.0) / stt).sqrt()
    } else {
        0.0
    };
    (slope, stderr)
}

/// Per-snapshot front positions and the fitted speed over the post-transient window.
pub fn track_front(traj: &Trajectory, xi: Point, level: f64, opts: &FrontOptions) -> Result<FrontRecord> {
    let snaps = traj.snapshots();
    if snaps.len() < 3 {
        return Err(KppError::Precondition("front tracking needs at least three snapshots".into()));
    }
    if !(level > 0.0) {
        return Err(KppError::Precondition("front level must be positive".into()));
    }
    let domain = snaps[0].domain();
    let proj = Projection::new(domain, xi);
    let far = proj.coords.last().copied().unwrap() - opts.margin.max(domain.buffer());
    let first = ((opts.transient * snaps.len() as f64).ceil() as usize).min(snaps.len() - 2);
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for (k, snap) in snaps.iter().enumerate() {
        let pos = crossing(&proj, snap.values(), level, snap.time())?;
        match pos {
            Some(s) if s > far => return Err(KppError::FrontEscaped { time: snap.time() }),
            Some(s) => {
                times.push(snap.time());
                positions.push(s);
            }
            None if k >= first => {
                return Err(KppError::NoCrossing(format!(
                    "solution stays below level {level} at t = {}",
                    snap.time()
                )))
            }
            None => {}
        }
    }
    let skip = times.iter().position(|&t| t >= snaps[first].time()).unwrap_or(times.len());
    let (wt, ws) = (&times[skip..], &positions[skip..]);
    if wt.len() < 2 {
        return Err(KppError::NoCrossing("regression window holds fewer than two crossings".into()));
    }
    let (speed, stderr) = regression(wt, ws);
    Ok(FrontRecord {
        window: (wt[0], *wt.last().unwrap()),
        times,
        positions,
        level,
        speed,
        stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeSample {
    pub time: f64,
    /// `max u` over `|x.xi| >= c_high t`.
    pub outer_max: f64,
    /// `max |u - u*|` over `|x.xi| <= c_low t`.
    pub inner_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadingReport {
    pub c_low: f64,
    pub c_high: f64,
    pub samples: Vec<ConeSample>,
    pub outer_max: f64,
    pub inner_gap: f64,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub pass_outer: bool,
    pub pass_inner: bool,
    pub pass: bool,
}

/// Checks extinction outside the cone `|x.xi| >= c_high t` and convergence to `u*`
/// inside `|x.xi| <= c_low t` over the final quarter of the snapshots.
#[allow(clippy::too_many_arguments)]
pub fn spreading_feature_check(
    traj: &Trajectory,
    xi: Point,
    c_low: f64,
    c_high: f64,
    u_star: &AttractorResult,
    period: f64,
    outer_tol: f64,
    inner_tol: f64,
) -> Result<SpreadingReport> {
    if !(c_low < c_high) {
        return Err(KppError::Precondition("c_low must be below c_high".into()));
    }
    let snaps = traj.snapshots();
    let start = snaps.len() - snaps.len() / 4;
    let window = &snaps[start..];
    if window.is_empty() {
        return Err(KppError::EmptyRegion("no snapshots in the final quarter".into()));
    }
    let mut samples = Vec::with_capacity(window.len());
    for snap in window {
        let t = snap.time();
        let domain = snap.domain();
        let reference = u_star.at_time(t, period)?;
        if **reference.domain() != **domain {
            return Err(KppError::DomainMismatch("attractor and trajectory domains differ".into()));
        }
        let (mut outer, mut inner) = (None::<f64>, None::<f64>);
        for (i, (&u, &v)) in snap.values().iter().zip(reference.values()).enumerate() {
            let s = dot(domain.coord(i), xi).abs();
            if s >= c_high * t {
                outer = Some(outer.map_or(u, |m| m.max(u)));
            }
            if s <= c_low * t {
                let g = (u - v).abs();
                inner = Some(inner.map_or(g, |m| m.max(g)));
            }
        }
        let outer_max = outer.ok_or_else(|| KppError::EmptyRegion(format!("outer cone is empty at t = {t}")))?;
        let inner_gap = inner.ok_or_else(|| KppError::EmptyRegion(format!("inner cone is empty at t = {t}")))?;
        samples.push(ConeSample {
            time: t,
            outer_max,
            inner_gap,
        });
    }
    let outer_max = samples.iter().map(|s| s.outer_max).fold(0.0, f64::max);
    let inner_gap = samples.iter().map(|s| s.inner_gap).fold(0.0, f64::max);
    let (pass_outer, pass_inner) = (outer_max < outer_tol, inner_gap < inner_tol);
    Ok(SpreadingReport {
        c_low,
        c_high,
        samples,
        outer_max,
        inner_gap,
        outer_tol,
        inner_tol,
        pass_outer,
        pass_inner,
        pass: pass_outer && pass_inner,
    })
}
