//! Discretized habitats: a truncated continuum box or a finite lattice
//! window centred on the origin, the periodic cell, and sampled fields.
//!
//! Grids are stored row-major with axis 0 slowest. In one dimension the
//! second coordinate of every point is reported as zero so that dot products
//! and norms can be written once for both dimensions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KppError, Result};

/// Point or direction in at most two dimensions; unused components are zero.
pub type Point = [f64; 2];

/// Relative tolerance used when checking that lengths are integer multiples.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    /// Truncated `R^N`: the box `[-L, L]^N` sampled with spacing `h`.
    Continuum { half_extent: f64, h: f64 },
    /// Truncated `Z^N`: the window `{-R..=R}^N`.
    Lattice { radius: usize },
}

/// Parameters from which a [`Domain`] is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub grid: GridKind,
    pub dim: usize,
    /// Spatial period per axis (a length for continua, a site count for lattices).
    pub periods: Vec<f64>,
    /// Width of the boundary strip excluded from every theorem check.
    #[serde(default)]
    pub buffer: f64,
}

impl DomainSpec {
    pub fn continuum(dim: usize, half_extent: f64, h: f64, period: f64) -> Self {
        DomainSpec {
            grid: GridKind::Continuum { half_extent, h },
            dim,
            periods: vec![period; dim],
            buffer: 0.0,
        }
    }

    pub fn lattice(dim: usize, radius: usize, period: usize) -> Self {
        DomainSpec {
            grid: GridKind::Lattice { radius },
            dim,
            periods: vec![period as f64; dim],
            buffer: 0.0,
        }
    }

    pub fn with_buffer(mut self, buffer: f64) -> Self {
        self.buffer = buffer;
        self
    }
}

fn integral_ratio(num: f64, den: f64) -> Option<usize> {
    let ratio = num / den;
    let n = ratio.round();
    if n >= 1.0 && (ratio - n).abs() <= ALIGN_TOL * ratio.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// The periodic cell `[0, p_1) x ... ` sampled on the domain grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    dim: usize,
    spacing: f64,
    counts: [usize; 2],
    lattice: bool,
}

impl Cell {
    pub fn new(dim: usize, spacing: f64, counts: &[usize], lattice: bool) -> Result<Self> {
        if !(1..=2).contains(&dim) || counts.len() != dim {
            return Err(KppError::config("cell.dim", "cells have dimension 1 or 2"));
        }
        if counts.iter().any(|&c| c == 0) || !(spacing > 0.0) {
            return Err(KppError::config("cell", "empty cell"));
        }
        let mut c = [1, 1];
        c[..dim].copy_from_slice(counts);
        Ok(Cell {
            dim,
            spacing,
            counts: c,
            lattice,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial period per axis.
    pub fn periods(&self) -> Point {
        [
            self.counts[0] as f64 * self.spacing,
            if self.dim == 2 {
                self.counts[1] as f64 * self.spacing
            } else {
                0.0
            },
        ]
    }

    pub(crate) fn split(&self, idx: usize) -> [usize; 2] {
        [idx / self.counts[1], idx % self.counts[1]]
    }

    pub(crate) fn join(&self, j: [usize; 2]) -> usize {
        j[0] * self.counts[1] + j[1]
    }

    /// Cell index reached from `idx` by the integer offset `off`, wrapping periodically.
    pub(crate) fn wrap(&self, idx: usize, off: [i32; 2]) -> usize {
        let j = self.split(idx);
        let a = (j[0] as i64 + off[0] as i64).rem_euclid(self.counts[0] as i64) as usize;
        let b = (j[1] as i64 + off[1] as i64).rem_euclid(self.counts[1] as i64) as usize;
        self.join([a, b])
    }

    pub fn coord(&self, idx: usize) -> Point {
        let j = self.split(idx);
        [j[0] as f64 * self.spacing, j[1] as f64 * self.spacing]
    }
}

/// A validated, immutable discretized habitat.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    spec: DomainSpec,
    half: usize,
    spacing: f64,
    cell: Cell,
}

/// Validates `spec` and computes the grid metadata.
pub fn build_domain(spec: &DomainSpec) -> Result<Domain> {
    Domain::new(spec.clone())
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        let dim = spec.dim;
        if !(1..=2).contains(&dim) {
            return Err(KppError::config("domain.dim", "dimension must be 1 or 2"));
        }
        if spec.periods.len() != dim {
            return Err(KppError::config(
                "domain.periods",
                format!("expected {dim} periods, got {}", spec.periods.len()),
            ));
        }
        let mut counts = vec![0usize; dim];
        let (half, spacing, extent, lattice) = match spec.grid {
            GridKind::Continuum { half_extent, h } => {
                if !(h > 0.0) || !h.is_finite() {
                    return Err(KppError::config("domain.h", "spacing must be positive"));
                }
                if !(half_extent > 0.0) || !half_extent.is_finite() {
                    return Err(KppError::config(
                        "domain.half_extent",
                        "half extent must be positive",
                    ));
                }
                for (axis, &p) in spec.periods.iter().enumerate() {
                    counts[axis] = integral_ratio(p, h).ok_or_else(|| {
                        KppError::config(
                            "domain.h",
                            format!("period p[{axis}] = {p} is not an integer multiple of h = {h}"),
                        )
                    })?;
                    if integral_ratio(half_extent, p).is_none() {
                        return Err(KppError::config(
                            "domain.half_extent",
                            format!(
                                "half extent {half_extent} is not an integer multiple of p[{axis}] = {p}"
                            ),
                        ));
                    }
                }
                let half = integral_ratio(half_extent, h).ok_or_else(|| {
                    KppError::config("domain.h", "half extent is not a multiple of h")
                })?;
                (half, h, half_extent, false)
            }
            GridKind::Lattice { radius } => {
                if radius == 0 {
                    return Err(KppError::config("domain.radius", "radius must be positive"));
                }
                for (axis, &p) in spec.periods.iter().enumerate() {
                    if p < 1.0 || p.fract() != 0.0 {
                        return Err(KppError::config(
                            format!("domain.periods[{axis}]"),
                            format!("lattice period {p} must be a positive integer"),
                        ));
                    }
                    if radius % (p as usize) != 0 {
                        return Err(KppError::config(
                            "domain.radius",
                            format!("radius {radius} is not a multiple of p[{axis}] = {p}"),
                        ));
                    }
                    counts[axis] = p as usize;
                }
                (radius, 1.0, radius as f64, true)
            }
        };
        if !(spec.buffer >= 0.0) || spec.buffer >= extent {
            return Err(KppError::config(
                "domain.buffer",
                format!("buffer {} must lie in [0, {extent})", spec.buffer),
            ));
        }
        let cell = Cell::new(dim, spacing, &counts, lattice)?;
        Ok(Domain {
            spec,
            half,
            spacing,
            cell,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.spec.grid, GridKind::Lattice { .. })
    }

    /// Grid spacing (`1` on lattices).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of grid steps from the origin to the boundary along each axis.
    pub fn half_count(&self) -> usize {
        self.half
    }

    /// Points per axis.
    pub fn side(&self) -> usize {
        2 * self.half + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn buffer(&self) -> f64 {
        self.spec.buffer
    }

    /// Distance from the origin to the boundary along an axis.
    pub fn half_extent(&self) -> f64 {
        self.half as f64 * self.spacing
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn origin_index(&self) -> usize {
        self.index_of([0, 0]).expect("origin is a grid point")
    }

    /// Integer grid offsets of point `idx` from the origin.
    pub fn offsets(&self, idx: usize) -> [i64; 2] {
        let k = self.half as i64;
        match self.dim() {
            1 => [idx as i64 - k, 0],
            _ => {
                let s = self.side();
                [(idx / s) as i64 - k, (idx % s) as i64 - k]
            }
        }
    }

    pub fn index_of(&self, off: [i64; 2]) -> Option<usize> {
        let k = self.half as i64;
        let inside = |o: i64| (-k..=k).contains(&o);
        match self.dim() {
            1 => (inside(off[0]) && off[1] == 0).then(|| (off[0] + k) as usize),
            _ => (inside(off[0]) && inside(off[1]))
                .then(|| ((off[0] + k) as usize) * self.side() + (off[1] + k) as usize),
        }
    }

    pub fn coord(&self, idx: usize) -> Point {
        let o = self.offsets(idx);
        [o[0] as f64 * self.spacing, o[1] as f64 * self.spacing]
    }

    /// Index of the cell point that `idx` maps to under the periodic tiling.
    pub fn cell_index(&self, idx: usize) -> usize {
        let o = self.offsets(idx);
        let c = self.cell.counts();
        self.cell.join([
            o[0].rem_euclid(c[0] as i64) as usize,
            o[1].rem_euclid(c[1] as i64) as usize,
        ])
    }

    /// Distance from point `idx` to the nearest face of the box.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        let o = self.offsets(idx);
        let k = self.half as i64;
        let steps = (0..self.dim()).map(|a| k - o[a].abs()).min().unwrap_or(0);
        steps as f64 * self.spacing
    }

    /// True if `idx` lies outside the exclusion buffer.
    pub fn is_protected(&self, idx: usize) -> bool {
        self.boundary_distance(idx) >= self.buffer() - ALIGN_TOL * self.spacing
    }

    /// Human-readable descriptor that [`Domain::from_descriptor`] parses back.
    pub fn descriptor(&self) -> String {
        let periods = self
            .spec
            .periods
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",");
        match self.spec.grid {
            GridKind::Continuum { half_extent, h } => format!(
                "continuum;dim={};L={};h={};p={};B={}",
                self.dim(),
                half_extent,
                h,
                periods,
                self.buffer()
            ),
            GridKind::Lattice { radius } => format!(
                "lattice;dim={};R={};p={};B={}",
                self.dim(),
                radius,
                periods,
                self.buffer()
            ),
        }
    }

    pub fn from_descriptor(text: &str) -> Result<Self> {
        let bad = |m: &str| KppError::Parse(format!("domain descriptor `{text}`: {m}"));
        let mut parts = text.split(';');
        let kind = parts.next().ok_or_else(|| bad("missing kind"))?;
        let (mut dim, mut l, mut h, mut r, mut p, mut b) = (None, None, None, None, None, 0.0);
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad("bad number"));
            match key {
                "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad("bad dim"))?),
                "L" => l = Some(num(value)?),
                "h" => h = Some(num(value)?),
                "R" => r = Some(value.parse::<usize>().map_err(|_| bad("bad radius"))?),
                "p" => {
                    p = Some(
                        value
                            .split(',')
                            .map(num)
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                "B" => b = num(value)?,
                _ => return Err(bad("unknown key")),
            }
        }
        let grid = match kind {
            "continuum" => GridKind::Continuum {
                half_extent: l.ok_or_else(|| bad("missing L"))?,
                h: h.ok_or_else(|| bad("missing h"))?,
            },
            "lattice" => GridKind::Lattice {
                radius: r.ok_or_else(|| bad("missing R"))?,
            },
            _ => return Err(bad("unknown kind")),
        };
        Domain::new(DomainSpec {
            grid,
            dim: dim.ok_or_else(|| bad("missing dim"))?,
            periods: p.ok_or_else(|| bad("missing p"))?,
            buffer: b,
        })
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// A real field sampled on every point of a [`Domain`] at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    domain: Arc<Domain>,
    values: Vec<f64>,
    time: f64,
    positive_floor: Option<f64>,
}

impl Field {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(KppError::DomainMismatch(format!(
                "{} values for a domain of {} points",
                values.len(),
                domain.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KppError::Precondition(format!(
                "non-finite value at grid index {i}"
            )));
        }
        Ok(Field {
            domain,
            values,
            time,
            positive_floor: None,
        })
    }

    pub fn constant(domain: Arc<Domain>, value: f64) -> Self {
        let n = domain.len();
        Field {
            domain,
            values: vec![value; n],
            time: 0.0,
            positive_floor: None,
        }
    }

    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..domain.len()).map(|i| f(domain.coord(i))).collect();
        Field::new(domain, values, 0.0)
    }

    /// Used by the integrators, which validate finiteness themselves.
    pub(crate) fn from_parts(domain: Arc<Domain>, values: Vec<f64>, time: f64) -> Self {
        Field {
            domain,
            values,
            time,
            positive_floor: None,
        }
    }

    /// Tags the field as a member of the strictly positive cone with floor `eps`.
    pub fn tag_strictly_positive(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(KppError::Precondition("positivity floor must be > 0".into()));
        }
        if let Some((index, &value)) = self.values.iter().enumerate().find(|(_, &v)| v < eps) {
            return Err(KppError::NotStrictlyPositive {
                index,
                value,
                floor: eps,
            });
        }
        self.positive_floor = Some(eps);
        Ok(self)
    }

    pub fn positive_floor(&self) -> Option<f64> {
        self.positive_floor
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(
            self.domain.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.time,
        )
    }

    pub(crate) fn same_domain(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain {
            Ok(())
        } else {
            Err(KppError::DomainMismatch(format!(
                "{} vs {}",
                self.domain, other.domain
            )))
        }
    }
}

/// Values on one periodic cell at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    cell: Cell,
    values: Vec<f64>,
    time: f64,
}

impl CellField {
    pub fn new(cell: Cell, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != cell.len() {
            return Err(KppError::DomainMismatch(format!(
                "{} values for a cell of {} points",
                values.len(),
                cell.len()
            )));
        }
        Ok(CellField { cell, values, time })
    }

    pub fn constant(cell: Cell, value: f64) -> Self {
        let n = cell.len();
        CellField {
            cell,
            values: vec![value; n],
            time: 0.0,
        }
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tiles a cell field over the whole domain, aligned so that cell index 0
/// sits on the origin.
pub fn extend_periodic(cell: &CellField, domain: &Arc<Domain>) -> Result<Field> {
    if cell.cell() != domain.cell() {
        return Err(KppError::DomainMismatch(format!(
            "cell {:?} is not aligned with domain {}",
            cell.cell().counts(),
            domain
        )));
    }
    let values = (0..domain.len())
        .map(|i| cell.values[domain.cell_index(i)])
        .collect();
    Ok(Field::from_parts(domain.clone(), values, cell.time))
}

/// Copies the values of the cell whose corner is the origin.
pub fn restrict_to_cell(u: &Field) -> CellField {
    let d = u.domain();
    let cell = d.cell().clone();
    let values = (0..cell.len())
        .map(|j| {
            let [a, b] = cell.split(j);
            let idx = d
                .index_of([a as i64, if d.dim() == 2 { b as i64 } else { 0 }])
                .expect("domain extent is a multiple of the period");
            u.values[idx]
        })
        .collect();
    CellField {
        cell,
        values,
        time: u.time,
    }
}

/// `max |u - v|` over the grid points accepted by `region`.
///
/// An empty region is an error so that tail checks can never pass vacuously.
pub fn sup_norm_gap(u: &Field, v: &Field, region: impl Fn(usize, Point) -> bool) -> Result<f64> {
    u.same_domain(v)?;
    let d = u.domain();
    let mut hit = false;
    let mut gap = 0.0f64;
    for i in 0..d.len() {
        if region(i, d.coord(i)) {
            hit = true;
            gap = gap.max((u.values[i] - v.values[i]).abs());
        }
    }
    if hit {
        Ok(gap)
    } else {
        Err(KppError::EmptyRegion("no grid point satisfies the region predicate".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(radius: usize, period: usize) -> Arc<Domain> {
        Arc::new(build_domain(&DomainSpec::lattice(1, radius, period)).unwrap())
    }

    #[test]
    fn continuum_point_count_and_cell() {
        let d = build_domain(&DomainSpec::continuum(1, 200.0, 0.1, 1.0)).unwrap();
        assert_eq!(d.len(), 4001);
        assert_eq!(d.cell().len(), 10);
        assert_eq!(d.coord(d.origin_index()), [0.0, 0.0]);
    }

    #[test]
    fn lattice_point_count_and_cell() {
        let d = build_domain(&DomainSpec::lattice(1, 500, 2)).unwrap();
        assert_eq!(d.len(), 1001);
        assert_eq!(d.cell().len(), 2);
    }

    #[test]
    fn misaligned_period_names_spacing() {
        let err = build_domain(&DomainSpec::continuum(1, 10.0, 0.3, 1.0)).unwrap_err();
        match err {
            KppError::Config { field, .. } => assert_eq!(field, "domain.h"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_dimensional_indexing() {
        let d = build_domain(&DomainSpec::continuum(2, 2.0, 0.5, 1.0)).unwrap();
        assert_eq!(d.side(), 9);
        assert_eq!(d.len(), 81);
        assert_eq!(d.cell().len(), 4);
        for i in 0..d.len() {
            assert_eq!(d.index_of(d.offsets(i)), Some(i));
        }
        let corner = d.index_of([-4, 4]).unwrap();
        assert_eq!(d.coord(corner), [-2.0, 2.0]);
        assert_eq!(d.boundary_distance(corner), 0.0);
        assert_eq!(d.boundary_distance(d.origin_index()), 2.0);
    }

    #[test]
    fn tiling_is_origin_aligned() {
        let d = line(4, 2);
        let cell = CellField::new(d.cell().clone(), vec![1.0, 2.0], 0.0).unwrap();
        let u = extend_periodic(&cell, &d).unwrap();
        assert_eq!(u.values(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0]);
        assert_eq!(restrict_to_cell(&u).values(), &[1.0, 2.0]);
    }

    #[test]
    fn constant_cell_tiles_to_constant_field() {
        let d = line(4, 2);
        let u = extend_periodic(&CellField::constant(d.cell().clone(), 1.0), &d).unwrap();
        assert!(u.values().iter().all(|&v| v == 1.0));
        assert!(restrict_to_cell(&Field::constant(d.clone(), 3.0))
            .values()
            .iter()
            .all(|&v| v == 3.0));
    }

    #[test]
    fn misaligned_cell_rejected() {
        let d = line(6, 3);
        let other = line(4, 2);
        let cell = CellField::constant(other.cell().clone(), 1.0);
        assert!(matches!(
            extend_periodic(&cell, &d),
            Err(KppError::DomainMismatch(_))
        ));
    }

    #[test]
    fn sup_gap_examples() {
        let d = Arc::new(build_domain(&DomainSpec::continuum(1, 10.0, 0.1, 1.0)).unwrap());
        let one = Field::constant(d.clone(), 1.0);
        let half = Field::constant(d.clone(), 0.5);
        assert_eq!(sup_norm_gap(&one, &one, |_, _| true).unwrap(), 0.0);
        assert_eq!(sup_norm_gap(&one, &half, |_, _| true).unwrap(), 0.5);
        let env = Field::from_fn(d.clone(), |x| (-norm(x)).exp()).unwrap();
        let zero = Field::constant(d.clone(), 0.0);
        let g = sup_norm_gap(&env, &zero, |_, x| norm(x) >= 3.0 - 1e-12).unwrap();
        assert!((g - (-3.0f64).exp()).abs() < 1e-12);
        assert!((g - 0.0498).abs() < 1e-4);
        assert!(matches!(
            sup_norm_gap(&one, &half, |_, x| norm(x) > 100.0),
            Err(KppError::EmptyRegion(_))
        ));
    }

    #[test]
    fn descriptor_round_trip() {
        for spec in [
            DomainSpec::continuum(2, 3.0, 0.25, 1.5).with_buffer(0.5),
            DomainSpec::lattice(1, 12, 4),
        ] {
            let d = build_domain(&spec).unwrap();
            assert_eq!(Domain::from_descriptor(&d.descriptor()).unwrap(), d);
        }
    }

    #[test]
    fn non_finite_values_rejected() {
        let d = line(2, 1);
        assert!(Field::new(d, vec![0.0, 1.0, f64::NAN, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn positivity_tag_enforces_floor() {
        let d = line(2, 1);
        let u = Field::constant(d.clone(), 0.5);
        assert_eq!(u.clone().tag_strictly_positive(0.1).unwrap().positive_floor(), Some(0.1));
        assert!(u.tag_strictly_positive(0.6).is_err());
    }
}
