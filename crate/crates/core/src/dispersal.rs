//! Dispersal operators: random (Laplacian), nonlocal (convolution minus
//! identity) and discrete (lattice neighbour differences), together with
//! their exponentially tilted forms acting on periodic cell fields.
//!
//! Every operator is reduced to a [`Stencil`] written in difference form,
//! `(Au)(x) = sum_o [w+ (u(x+o) - u(x)) + w- (u(x-o) - u(x))] + shift * u(x)`,
//! so constants are annihilated exactly whenever `shift == 0`.

use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{dot, CellField, Cell, Domain, Field, Point};
use crate::error::{KppError, Result};

/// Radial kernel profile before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `exp(-1 / (1 - (r/R)^2))` on `r < R`.
    Bump,
    /// Piecewise-linear samples `(radius, value)`; zero past the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

/// A compactly supported, radially symmetric dispersal kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub profile: RadialProfile,
    pub support_radius: f64,
}

impl KernelSpec {
    pub fn bump(support_radius: f64) -> Result<Self> {
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(KppError::config(
                "dispersal.kernel.support_radius",
                "support radius must be positive",
            ));
        }
        Ok(KernelSpec {
            profile: RadialProfile::Bump,
            support_radius,
        })
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let field = "dispersal.kernel";
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(KppError::config(field, "need at least two (radius, value) rows"));
        }
        if radii[0] != 0.0 {
            return Err(KppError::config(field, "first radius must be 0"));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KppError::config(field, "radii must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(KppError::config(field, "kernel values must be finite and non-negative"));
        }
        let support_radius = *radii.last().unwrap();
        Ok(KernelSpec {
            profile: RadialProfile::Tabulated { radii, values },
            support_radius,
        })
    }

    /// Loads a two-column `radius,value` table. A non-numeric first line is
    /// treated as a header.
    pub fn from_csv_reader(reader: impl BufRead) -> Result<Self> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (r, v) = match (cols.next(), cols.next()) {
                (Some(r), Some(v)) => (r.parse::<f64>(), v.parse::<f64>()),
                _ => return Err(KppError::Parse(format!("kernel line {}: expected two columns", n + 1))),
            };
            match (r, v) {
                (Ok(r), Ok(v)) => {
                    radii.push(r);
                    values.push(v);
                }
                _ if radii.is_empty() && n == 0 => continue,
                _ => return Err(KppError::Parse(format!("kernel line {}: not numeric", n + 1))),
            }
        }
        KernelSpec::tabulated(radii, values)
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| KppError::Io(format!("{}: {e}", path.as_ref().display())))?;
        KernelSpec::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Unnormalized profile value at radius `r`.
    pub fn profile_at(&self, r: f64) -> f64 {
        if r >= self.support_radius {
            return 0.0;
        }
        match &self.profile {
            RadialProfile::Bump => {
                let s = r / self.support_radius;
                (-1.0 / (1.0 - s * s)).exp()
            }
            RadialProfile::Tabulated { radii, values } => {
                let k = radii.partition_point(|&x| x <= r).max(1) - 1;
                let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    /// Midpoint-rule discretization on a grid of spacing `h`, renormalized to unit mass.
    pub fn discretize(&self, h: f64, dim: usize) -> Result<DiscreteKernel> {
        let reach = (self.support_radius / h).ceil() as i32;
        let cell_volume = h.powi(dim as i32);
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let range2 = if dim == 2 { -reach..=reach } else { 0..=0 };
        for a in -reach..=reach {
            for b in range2.clone() {
                let r = h * ((a * a + b * b) as f64).sqrt();
                let k = self.profile_at(r);
                if k > 0.0 {
                    offsets.push([a, b]);
                    weights.push(cell_volume * k);
                }
            }
        }
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(KppError::config(
                "dispersal.kernel",
                format!("kernel has no mass on a grid of spacing {h}"),
            ));
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(DiscreteKernel { offsets, weights })
    }
}

/// Quadrature offsets and weights of a kernel on a fixed grid (unit mass).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub offsets: Vec<[i32; 2]>,
    pub weights: Vec<f64>,
}

impl DiscreteKernel {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Jump rate towards one unit neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborRate {
    pub offset: [i32; 2],
    pub rate: f64,
}

/// Rates `a_k` for the unit neighbours `k` of a lattice site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeRates {
    pub rates: Vec<NeighborRate>,
}

impl LatticeRates {
    pub fn symmetric(dim: usize, rate: f64) -> Self {
        let mut rates = Vec::new();
        for axis in 0..dim {
            for sign in [1, -1] {
                let mut offset = [0, 0];
                offset[axis] = sign;
                rates.push(NeighborRate { offset, rate });
            }
        }
        LatticeRates { rates }
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().map(|r| r.rate).sum()
    }

    fn rate(&self, offset: [i32; 2]) -> Option<f64> {
        self.rates.iter().find(|r| r.offset == offset).map(|r| r.rate)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.rates.len() != 2 * dim {
            return Err(KppError::config(
                "dispersal.rates",
                format!("expected {} unit-neighbour rates, got {}", 2 * dim, self.rates.len()),
            ));
        }
        for r in &self.rates {
            let unit = r.offset[0].abs() + r.offset[1].abs() == 1 && (dim == 2 || r.offset[1] == 0);
            if !unit {
                return Err(KppError::config(
                    "dispersal.rates",
                    format!("offset {:?} is not a unit neighbour", r.offset),
                ));
            }
            if !(r.rate > 0.0) || !r.rate.is_finite() {
                return Err(KppError::config(
                    "dispersal.rates",
                    format!("rate for {:?} must be positive", r.offset),
                ));
            }
        }
        for axis in 0..dim {
            for sign in [1, -1] {
                let mut offset = [0, 0];
                offset[axis] = sign;
                if self.rate(offset).is_none() {
                    return Err(KppError::config(
                        "dispersal.rates",
                        format!("missing rate for neighbour {offset:?}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DispersalSpec {
    Random,
    Nonlocal { kernel: KernelSpec },
    Discrete { rates: LatticeRates },
}

impl DispersalSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DispersalSpec::Random => "random",
            DispersalSpec::Nonlocal { .. } => "nonlocal",
            DispersalSpec::Discrete { .. } => "discrete",
        }
    }

    pub fn check_lattice(&self, lattice: bool) -> Result<()> {
        match (self, lattice) {
            (DispersalSpec::Discrete { .. }, false) => Err(KppError::DomainMismatch(
                "discrete dispersal needs a lattice domain".into(),
            )),
            (DispersalSpec::Random | DispersalSpec::Nonlocal { .. }, true) => {
                Err(KppError::DomainMismatch(format!(
                    "{} dispersal needs a continuum domain",
                    self.name()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Direction `xi` on the unit sphere and decay rate `mu >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub xi: Point,
    pub mu: f64,
}

impl TiltSpec {
    pub fn new(xi: &[f64], mu: f64) -> Result<Self> {
        if xi.is_empty() || xi.len() > 2 {
            return Err(KppError::config("tilt.xi", "direction must have 1 or 2 components"));
        }
        let mut p = [0.0; 2];
        p[..xi.len()].copy_from_slice(xi);
        let n = p[0].hypot(p[1]);
        if (n - 1.0).abs() > 1e-12 {
            return Err(KppError::config("tilt.xi", format!("|xi| = {n} is not 1")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(KppError::config("tilt.mu", format!("mu = {mu} must be >= 0")));
        }
        Ok(TiltSpec { xi: p, mu })
    }

    pub fn untilted(dim: usize) -> Self {
        let _ = dim;
        TiltSpec {
            xi: [1.0, 0.0],
            mu: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pair {
    offset: [i32; 2],
    forward: f64,
    backward: f64,
}

/// Linear operator in difference form over integer grid offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pairs: Vec<Pair>,
    shift: f64,
}

impl Stencil {
    /// Builds the (optionally tilted) stencil for `spec` on a grid of spacing `h`.
    pub fn new(spec: &DispersalSpec, dim: usize, h: f64, tilt: Option<&TiltSpec>) -> Result<Self> {
        let (xi, mu) = tilt.map_or(([0.0; 2], 0.0), |t| (t.xi, t.mu));
        if dim == 1 && xi[1] != 0.0 {
            return Err(KppError::config("tilt.xi", "one-dimensional problems need xi = +-1"));
        }
        // Tilt factor for a jump by `offset`: exp(-mu (offset h) . xi).
        let tilt_of = |offset: [i32; 2]| {
            let z = [offset[0] as f64 * h, offset[1] as f64 * h];
            (-mu * dot(z, xi)).exp()
        };
        let mut pairs = Vec::new();
        let mut shift = 0.0;
        match spec {
            DispersalSpec::Random => {
                let inv_h2 = 1.0 / (h * h);
                for axis in 0..dim {
                    let mut offset = [0, 0];
                    offset[axis] = 1;
                    let drift = mu * xi[axis] / h;
                    pairs.push(Pair {
                        offset,
                        forward: inv_h2 - drift,
                        backward: inv_h2 + drift,
                    });
                }
                shift = mu * mu;
            }
            DispersalSpec::Nonlocal { kernel } => {
                let dk = kernel.discretize(h, dim)?;
                for (&offset, &w) in dk.offsets.iter().zip(&dk.weights) {
                    // keep one representative of each {o, -o}; o = 0 contributes nothing
                    let positive = offset[0] > 0 || (offset[0] == 0 && offset[1] > 0);
                    if !positive {
                        continue;
                    }
                    let forward = w * tilt_of(offset);
                    let backward = w * tilt_of([-offset[0], -offset[1]]);
                    shift += (forward - w) + (backward - w);
                    pairs.push(Pair {
                        offset,
                        forward,
                        backward,
                    });
                }
            }
            DispersalSpec::Discrete { rates } => {
                rates.validate(dim)?;
                for axis in 0..dim {
                    let mut plus = [0, 0];
                    plus[axis] = 1;
                    let minus = [-plus[0], -plus[1]];
                    let (a_plus, a_minus) = (rates.rate(plus).unwrap(), rates.rate(minus).unwrap());
                    let forward = a_plus * tilt_of(plus);
                    let backward = a_minus * tilt_of(minus);
                    shift += (forward - a_plus) + (backward - a_minus);
                    pairs.push(Pair {
                        offset: plus,
                        forward,
                        backward,
                    });
                }
            }
        }
        let finite = shift.is_finite() && pairs.iter().all(|p| p.forward.is_finite() && p.backward.is_finite());
        if !finite {
            return Err(KppError::config(
                "tilt.mu",
                format!("tilt mu = {mu} overflows the periodized kernel weights"),
            ));
        }
        Ok(Stencil { pairs, shift })
    }

    /// Diagonal multiple of the identity added to the difference part.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Sup-norm scale of the operator: total jump weight plus `|shift|`.
    pub fn bound(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.forward.abs() + p.backward.abs())
            .sum::<f64>()
            + self.shift.abs()
    }

    /// Largest offset magnitude along any axis.
    pub fn reach(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.offset[0].unsigned_abs().max(p.offset[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    #[inline]
    fn point(&self, u: &[f64], center: usize, mut nbr: impl FnMut(usize, [i32; 2]) -> (usize, usize)) -> f64 {
        let uc = u[center];
        let mut acc = 0.0;
        for (k, p) in self.pairs.iter().enumerate() {
            let (plus, minus) = nbr(k, p.offset);
            acc += p.forward * (u[plus] - uc) + p.backward * (u[minus] - uc);
        }
        if self.shift != 0.0 {
            acc += self.shift * uc;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Boundary {
    /// Mirror about the boundary point (homogeneous Neumann).
    Reflect,
    /// Repeat the nearest boundary value.
    Clamp,
}

fn fold_index(j: i64, side: i64, boundary: Boundary) -> usize {
    let folded = match boundary {
        Boundary::Clamp => j,
        Boundary::Reflect => {
            if j < 0 {
                -j
            } else if j >= side {
                2 * (side - 1) - j
            } else {
                j
            }
        }
    };
    folded.clamp(0, side - 1) as usize
}

/// A dispersal operator prepared for one truncated domain.
#[derive(Debug, Clone)]
pub struct DispersalOperator {
    domain: Arc<Domain>,
    spec: DispersalSpec,
    stencil: Stencil,
    boundary: Boundary,
    strides: Vec<isize>,
}

impl DispersalOperator {
    pub fn new(spec: &DispersalSpec, domain: &Arc<Domain>) -> Result<Self> {
        spec.check_lattice(domain.is_lattice())?;
        let stencil = Stencil::new(spec, domain.dim(), domain.spacing(), None)?;
        if stencil.reach() > domain.half_count() {
            return Err(KppError::DomainMismatch(
                "kernel support is wider than the domain".into(),
            ));
        }
        let boundary = match spec {
            DispersalSpec::Random => Boundary::Reflect,
            _ => Boundary::Clamp,
        };
        let side = domain.side() as isize;
        let strides = stencil
            .pairs
            .iter()
            .map(|p| match domain.dim() {
                1 => p.offset[0] as isize,
                _ => p.offset[0] as isize * side + p.offset[1] as isize,
            })
            .collect();
        Ok(DispersalOperator {
            domain: domain.clone(),
            spec: spec.clone(),
            stencil,
            boundary,
            strides,
        })
    }

    pub fn spec(&self) -> &DispersalSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Writes `A u` into `out`.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let d = &*self.domain;
        let side = d.side() as i64;
        let k = d.half_count() as i64;
        let reach = self.stencil.reach() as i64;
        let boundary = self.boundary;
        for (i, o) in out.iter_mut().enumerate() {
            let off = d.offsets(i);
            let interior = (0..d.dim()).all(|a| off[a].abs() + reach <= k);
            *o = if interior {
                let strides = &self.strides;
                self.stencil.point(u, i, |n, _| {
                    let s = strides[n];
                    ((i as isize + s) as usize, (i as isize - s) as usize)
                })
            } else {
                let j = [off[0] + k, off[1] + k];
                self.stencil.point(u, i, |_, o| {
                    let at = |sign: i64| {
                        let a = fold_index(j[0] + sign * o[0] as i64, side, boundary);
                        if d.dim() == 1 {
                            a
                        } else {
                            let b = fold_index(j[1] + sign * o[1] as i64, side, boundary);
                            a * side as usize + b
                        }
                    };
                    (at(1), at(-1))
                })
            };
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if **u.domain() != *self.domain {
            return Err(KppError::DomainMismatch("field lives on another domain".into()));
        }
        let mut out = vec![0.0; u.values().len()];
        self.apply_into(u.values(), &mut out);
        Ok(Field::from_parts(u.domain().clone(), out, u.time()))
    }
}

/// `A u` on a truncated domain.
pub fn apply_dispersal(spec: &DispersalSpec, u: &Field) -> Result<Field> {
    DispersalOperator::new(spec, u.domain())?.apply(u)
}

/// A tilted operator `A_{xi,mu}` prepared for one periodic cell.
#[derive(Debug, Clone)]
pub struct CellOperator {
    cell: Cell,
    stencil: Stencil,
    neighbors: Vec<(usize, usize)>,
}

impl CellOperator {
    pub fn new(spec: &DispersalSpec, cell: &Cell, tilt: &TiltSpec) -> Result<Self> {
        spec.check_lattice(cell.is_lattice())?;
        let stencil = Stencil::new(spec, cell.dim(), cell.spacing(), Some(tilt))?;
        let np = stencil.pairs.len();
        let mut neighbors = Vec::with_capacity(np * cell.len());
        for j in 0..cell.len() {
            for p in &stencil.pairs {
                let o = p.offset;
                neighbors.push((cell.wrap(j, o), cell.wrap(j, [-o[0], -o[1]])));
            }
        }
        Ok(CellOperator {
            cell: cell.clone(),
            stencil,
            neighbors,
        })
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let np = self.stencil.pairs.len();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.neighbors[j * np..(j + 1) * np];
            *o = self.stencil.point(v, j, |n, _| row[n]);
        }
    }
}

/// `A_{xi,mu} v` for a periodic cell field; offsets wrap around the cell, so a
/// kernel wider than the cell is periodized automatically.
pub fn apply_tilted(spec: &DispersalSpec, tilt: &TiltSpec, v: &CellField) -> Result<CellField> {
    let op = CellOperator::new(spec, v.cell(), tilt)?;
    let mut out = vec![0.0; v.values().len()];
    op.apply_into(v.values(), &mut out);
    CellField::new(v.cell().clone(), out, v.time())
}
