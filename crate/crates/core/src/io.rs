//! CSV serialization of fields and trajectories.
//!
//! A field file starts with `# domain=<descriptor> t=<time>` followed by one
//! row per grid point: coordinates in axis order, then the value.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::domain::{Domain, Field};
use crate::error::{KppError, Result};
use crate::evolve::Trajectory;

fn coord_row(out: &mut String, domain: &Domain, idx: usize) {
    let x = domain.coord(idx);
    for xa in &x[..domain.dim()] {
        let _ = write!(out, "{xa:?},");
    }
}

pub fn write_field(mut w: impl Write, u: &Field) -> Result<()> {
    let d = u.domain();
    let mut out = format!("# domain={} t={:?}\n", d.descriptor(), u.time());
    for (i, v) in u.values().iter().enumerate() {
        coord_row(&mut out, d, i);
        let _ = writeln!(out, "{v:?}");
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_field(r: impl BufRead) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| KppError::Parse("empty field file".into()))??;
    let rest = header
        .strip_prefix("# domain=")
        .ok_or_else(|| KppError::Parse(format!("bad header {header:?}")))?;
    let (descriptor, time) = rest
        .rsplit_once(" t=")
        .ok_or_else(|| KppError::Parse(format!("header lacks time: {header:?}")))?;
    let time: f64 = time
        .trim()
        .parse()
        .map_err(|_| KppError::Parse(format!("bad time {time:?}")))?;
    let domain = Arc::new(Domain::from_descriptor(descriptor)?);
    let mut values = Vec::with_capacity(domain.len());
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or_default();
        let v: f64 = last
            .trim()
            .parse()
            .map_err(|_| KppError::Parse(format!("row {}: bad value {last:?}", n + 2)))?;
        values.push(v);
    }
    if values.len() != domain.len() {
        return Err(KppError::Parse(format!(
            "expected {} rows, found {}",
            domain.len(),
            values.len()
        )));
    }
    Field::new(domain, values, time)
}

/// Long format: `t,x[,y],u` with one row per snapshot and grid point.
pub fn write_trajectory(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    let Some(first) = traj.snapshots().first() else {
        return Ok(());
    };
    let d = first.domain();
    let mut out = String::from(if d.dim() == 2 { "t,x,y,u\n" } else { "t,x,u\n" });
    for snap in traj.snapshots() {
        for (i, v) in snap.values().iter().enumerate() {
            let _ = write!(out, "{:?},", snap.time());
            coord_row(&mut out, d, i);
            let _ = writeln!(out, "{v:?}");
        }
        w.write_all(out.as_bytes())?;
        out.clear();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, DomainSpec};

    #[test]
    fn field_round_trip_is_exact() {
        let d = Arc::new(build_domain(&DomainSpec::continuum(1, 2.0, 0.5, 1.0)).unwrap());
        let u = Field::from_fn(d, |x| (x[0] * 0.3).exp() / 7.0).unwrap().with_time(1.25);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# domain=continuum;dim=1;"));
        assert!(text.lines().nth(1).unwrap().starts_with("-2.0,"));
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.time(), 1.25);
    }

    #[test]
    fn two_dimensional_rows_carry_both_coordinates() {
        let d = Arc::new(build_domain(&DomainSpec::lattice(2, 1, 1)).unwrap());
        let u = Field::constant(d, 1.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert_eq!(text.lines().nth(1).unwrap(), "-1.0,-1.0,1.0");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let d = Arc::new(build_domain(&DomainSpec::lattice(1, 2, 1)).unwrap());
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::constant(d, 1.0)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_field(cut.as_bytes()), Err(KppError::Parse(_))));
    }

    #[test]
    fn trajectory_long_format() {
        let d = Arc::new(build_domain(&DomainSpec::lattice(1, 1, 1)).unwrap());
        let traj = Trajectory::new(vec![
            Field::constant(d.clone(), 1.0),
            Field::constant(d, 2.0).with_time(0.5),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "t,x,u");
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[6], "0.5,1.0,2.0");
    }
}
