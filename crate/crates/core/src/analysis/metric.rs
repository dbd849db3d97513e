use serde::Serialize;

use crate::domain::Field;
use crate::error::{KppError, Result};
use crate::evolve::Model;

/// Tolerated per-step increase of a sequence that should be nonincreasing.
pub(crate) const MONOTONE_TOL: f64 = 1e-12;

fn check_positive(u: &Field) -> Result<()> {
    let floor = u.positive_floor().unwrap_or(0.0);
    match u.values().iter().position(|&v| !(v > floor)) {
        Some(index) => Err(KppError::NotStrictlyPositive {
            index,
            value: u.values()[index],
            floor,
        }),
        None => Ok(()),
    }
}

/// `rho(u, v) = inf { ln a : u / a <= v <= a u, a >= 1 } = max |ln u - ln v|`.
pub fn part_metric(u: &Field, v: &Field) -> Result<f64> {
    if **u.domain() != **v.domain() {
        return Err(KppError::DomainMismatch("part metric of fields on different domains".into()));
    }
    check_positive(u)?;
    check_positive(v)?;
    Ok(u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// `rho_n = rho(u(nT; u0), u(nT; v0))` for `n = 0..=n_periods`.
    pub rho: Vec<f64>,
    /// Bounds `eps <= u0, v0 <= M` of the initial pair.
    pub lower: f64,
    pub upper: f64,
    /// Largest increase `rho_{n+1} - rho_n` (negative when strictly decreasing).
    pub max_increase: f64,
    /// Smallest per-period drop while `rho_n >= sigma`; `None` if no such period.
    pub delta_hat: Option<f64>,
    pub sigma: f64,
    pub pass: bool,
}

/// Follows the part metric between two solutions over `n_periods` periods.
pub fn part_metric_decay_test(model: &Model, u0: &Field, v0: &Field, n_periods: usize, sigma: f64) -> Result<DecayReport> {
    let mut rho = vec![part_metric(u0, v0)?];
    let lower = u0.min().min(v0.min());
    let upper = u0.max().max(v0.max());
    let (mut u, mut v) = (u0.clone().with_time(0.0), v0.clone().with_time(0.0));
    for n in 0..n_periods {
        let t0 = n as f64 * model.period();
        u = model.period_map(&u, t0, 1)?;
        v = model.period_map(&v, t0, 1)?;
        rho.push(part_metric(&u, &v)?);
    }
    let mut max_increase = f64::NEG_INFINITY;
    let mut delta_hat: Option<f64> = None;
    for w in rho.windows(2) {
        max_increase = max_increase.max(w[1] - w[0]);
        if w[0] >= sigma {
            let drop = w[0] - w[1];
            delta_hat = Some(delta_hat.map_or(drop, |d| d.min(drop)));
        }
    }
    let pass = max_increase <= MONOTONE_TOL && delta_hat.is_none_or(|d| d > 0.0);
    Ok(DecayReport {
        rho,
        lower,
        upper,
        max_increase,
        delta_hat,
        sigma,
        pass,
    })
}
