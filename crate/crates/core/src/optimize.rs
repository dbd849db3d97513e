//! Scalar minimization used by the spreading-speed search.

/// `1 / phi`, the golden-section shrink factor.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search on a bracket known to contain a unimodal minimum.
#[derive(Debug, Clone, Copy)]
pub struct GoldenSection {
    /// Stop when the bracket width falls below `rel_tol * |x|`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for GoldenSection {
    fn default() -> Self {
        GoldenSection {
            rel_tol: 1e-6,
            max_iter: 200,
        }
    }
}

impl GoldenSection {
    /// Returns `(x_min, f(x_min), evaluations)` for a fallible objective.
    pub fn minimize<E>(
        &self,
        mut f: impl FnMut(f64) -> Result<f64, E>,
        lo: f64,
        hi: f64,
    ) -> Result<(f64, f64, usize), E> {
        let (mut a, mut b) = (lo.min(hi), lo.max(hi));
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = f(c)?;
        let mut fd = f(d)?;
        let mut evals = 2;
        for _ in 0..self.max_iter {
            let mid = 0.5 * (a + b);
            if (b - a) <= self.rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d)?;
            }
            evals += 1;
        }
        Ok(if fc < fd { (c, fc, evals) } else { (d, fd, evals) })
    }
}

/// Geometric grid `start * ratio^k` up to and including the first point past `stop`.
pub fn geometric_grid(start: f64, stop: f64, ratio: f64) -> Vec<f64> {
    let mut grid = vec![start];
    let mut x = start;
    while x < stop {
        x = (x * ratio).min(stop);
        grid.push(x);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let gs = GoldenSection { rel_tol: 1e-10, max_iter: 500 };
        let (x, fx, _) = gs
            .minimize(|x| Ok::<_, ()>((x - 1.3) * (x - 1.3) + 2.0), 0.0, 5.0)
            .unwrap();
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn speed_functional_minimum() {
        // (mu^2 + 1) / mu has its minimum 2 at mu = 1
        let (x, fx, _) = GoldenSection::default()
            .minimize(|m| Ok::<_, ()>((m * m + 1.0) / m), 0.5, 3.0)
            .unwrap();
        assert!((x - 1.0).abs() < 1e-5);
        assert!((fx - 2.0).abs() < 1e-10);
    }

    #[test]
    fn errors_propagate() {
        let r = GoldenSection::default().minimize(|_| Err::<f64, _>("boom"), 0.0, 1.0);
        assert_eq!(r.unwrap_err(), "boom");
    }

    #[test]
    fn grid_is_geometric() {
        let g = geometric_grid(1e-3, 20.0, 1.3);
        assert_eq!(g[0], 1e-3);
        assert_eq!(*g.last().unwrap(), 20.0);
        assert!(g.windows(2).all(|w| w[1] > w[0] && w[1] / w[0] <= 1.3 + 1e-12));
    }
}
