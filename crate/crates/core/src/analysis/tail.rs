use serde::Serialize;

use super::attractor::AttractorResult;
use crate::domain::{norm, sup_norm_gap};
use crate::error::{KppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub radius: f64,
    /// Max over phases of `sup_{|x| >= r, protected} |u* - u0*|`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub monotone: bool,
    pub final_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Gap between the perturbed and reference attractors outside growing balls.
pub fn tail_gap_profile(
    u_star: &AttractorResult,
    u0_star: &AttractorResult,
    radii: &[f64],
    tolerance: f64,
) -> Result<TailReport> {
    if u_star.phases.len() != u0_star.phases.len() {
        return Err(KppError::DomainMismatch("attractors use different phase grids".into()));
    }
    if radii.is_empty() {
        return Err(KppError::Precondition("no radii requested".into()));
    }
    let domain = u_star.phases[0].domain().clone();
    let reach = domain.half_extent() - domain.buffer();
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        if !(radius >= 0.0 && radius <= reach) {
            return Err(KppError::Precondition(format!(
                "radius {radius} lies beyond the protected region (|x| <= {reach})"
            )));
        }
        let mut gap = 0.0f64;
        for (a, b) in u_star.phases.iter().zip(&u0_star.phases) {
            let g = sup_norm_gap(a, b, |i, x| norm(x) >= radius && domain.is_protected(i))?;
            gap = gap.max(g);
        }
        rows.push(TailRow { radius, gap });
    }
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
    let final_gap = rows.last().unwrap().gap;
    Ok(TailReport {
        monotone,
        final_gap,
        tolerance,
        pass: monotone && final_gap < tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{find_attractor_from_constant, AttractorOptions};
    use crate::domain::{build_domain, DomainSpec};
    use crate::evolve::{IntegratorSpec, Model};
    use crate::reaction::{Coefficient, ParametricKpp, Perturbation, ReactionSpec};
    use crate::DispersalSpec;
    use std::sync::Arc;

    fn attractors(perturbation: Perturbation) -> (AttractorResult, AttractorResult) {
        let d = Arc::new(build_domain(&DomainSpec::continuum(1, 20.0, 0.25, 1.0).with_buffer(4.0)).unwrap());
        let kpp = ParametricKpp {
            r0: Coefficient::constant(1.0),
            b: Coefficient::constant(1.0),
            perturbation,
        };
        let rx = ReactionSpec::kpp(kpp, 1.0, &[1.0]).unwrap();
        let model = Model::new(&d, &DispersalSpec::Random, rx, IntegratorSpec::euler(0.01)).unwrap();
        let reference = model.with_reaction(model.reaction().reference()).unwrap();
        let m = model.reaction().m0();
        let opts = AttractorOptions::default();
        (
            find_attractor_from_constant(&model, m, &opts).unwrap(),
            find_attractor_from_constant(&reference, m, &opts).unwrap(),
        )
    }

    #[test]
    fn no_perturbation_no_gap() {
        let (u, u0) = attractors(Perturbation::None);
        let rep = tail_gap_profile(&u, &u0, &[0.0, 5.0, 10.0], 1e-9).unwrap();
        assert!(rep.rows.iter().all(|r| r.gap == 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn bump_gap_decays() {
        let (u, u0) = attractors(Perturbation::Bump {
            amplitude: 0.5,
            radius: 2.0,
        });
        let rep = tail_gap_profile(&u, &u0, &[1.0, 3.0, 8.0, 16.0], 1e-2).unwrap();
        assert!(rep.monotone, "{rep:?}");
        assert!(rep.rows[0].gap > 10.0 * rep.rows[2].gap);
        assert!(rep.pass);
        assert!(tail_gap_profile(&u, &u0, &[17.0], 1e-2).is_err());
    }
}
