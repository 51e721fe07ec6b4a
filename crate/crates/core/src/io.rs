//! Plot-ready CSV and JSON artifacts. Floats are written in shortest
//! round-trip form, so identical runs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::filter::RunnerState;
use crate::linalg::vech;
use crate::mze::DensityGrid;
use crate::sde::{FilterTrajectory, PathBundle};

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// `path_id, step, t, x_*, y_*, R, diverged`. `r[i]` is the return path of
/// `bundles[i]`.
pub fn write_paths<W: Write>(out: W, bundles: &[PathBundle<f64>], r: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (n, my) = bundles
        .first()
        .map_or((0, 0), |b| (b.x[0].len(), b.y[0].len()));
    let mut header: Vec<String> = vec!["path_id".into(), "step".into(), "t".into()];
    header.extend(numbered("x", n));
    header.extend(numbered("y", my));
    header.extend(["R".into(), "diverged".into()]);
    w.write_record(&header)?;
    for (b, r) in bundles.iter().zip(r) {
        for k in 0..b.x.len() {
            let mut rec = vec![b.path_id.to_string(), k.to_string(), b.grid.time(k).to_string()];
            rec.extend(b.x[k].iter().map(f64::to_string));
            rec.extend(b.y[k].iter().map(f64::to_string));
            rec.push(r.get(k).map_or_else(String::new, f64::to_string));
            rec.push(u8::from(b.diverged).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One filtered path for [`write_filter`]; `ess` comes from the particle
/// oracle when it was run.
pub struct FilterRecord<'a> {
    pub path_id: u64,
    pub trajectory: &'a FilterTrajectory<f64>,
    pub ess: Option<&'a [f64]>,
}

/// `path_id, step, t, m_*, vechPi_*, ess` for Gaussian filters and
/// `path_id, step, t, p_*, ess` for Wonham.
pub fn write_filter<W: Write>(out: W, records: &[FilterRecord<'_>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = vec!["path_id".into(), "step".into(), "t".into()];
    match &first.trajectory.states[0] {
        RunnerState::Gaussian(g) => {
            let n = g.m.len();
            header.extend(numbered("m", n));
            header.extend(numbered("vechPi", n * (n + 1) / 2));
        }
        RunnerState::Simplex(s) => header.extend(numbered("p", s.p.len())),
    }
    header.push("ess".into());
    w.write_record(&header)?;
    for r in records {
        let traj = r.trajectory;
        for (k, state) in traj.states.iter().enumerate() {
            let mut rec = vec![r.path_id.to_string(), k.to_string(), traj.grid.time(k).to_string()];
            match state {
                RunnerState::Gaussian(g) => {
                    rec.extend(g.m.iter().map(f64::to_string));
                    rec.extend(vech(&g.pi).iter().map(f64::to_string));
                }
                RunnerState::Simplex(s) => rec.extend(s.p.iter().map(f64::to_string)),
            }
            rec.push(r.ess.and_then(|e| e.get(k)).map_or_else(String::new, f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, zeta_0[, zeta_1], q`, one row per cell and snapshot.
pub fn write_density<W: Write>(out: W, grids: &[DensityGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = grids.first().map_or(1, |g| g.axes.len());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(numbered("zeta", dim));
    header.push("q".into());
    w.write_record(&header)?;
    for g in grids {
        for (idx, q) in g.values.iter().enumerate() {
            let mut rec = vec![g.t.to_string()];
            rec.extend(g.center(idx).iter().map(f64::to_string));
            rec.push(q.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mze::Axis;
    use crate::sde::{MeasureTag, TimeGrid};
    use nalgebra::DVector;

    #[test]
    fn path_csv_layout() {
        let grid = TimeGrid::with_steps(0.0, 1.0, 2).unwrap();
        let b = PathBundle {
            path_id: 3,
            grid,
            x: vec![DVector::from_element(1, 0.5); 3],
            y: vec![DVector::from_element(2, 0.0); 3],
            r: Vec::new(),
            dw: Vec::new(),
            seed: 0,
            measure: MeasureTag::P,
            diverged: false,
        };
        let mut buf = Vec::new();
        write_paths(&mut buf, &[b], &[vec![1.0, 1.25, 1.5]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,step,t,x_0,y_0,y_1,R,diverged");
        assert_eq!(lines[2], "3,1,0.5,0.5,0,0,1.25,0");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn density_csv_layout() {
        let axes = vec![Axis { lo: 0.0, hi: 1.0, n_cells: 2 }, Axis { lo: 0.0, hi: 2.0, n_cells: 2 }];
        let g = DensityGrid {
            axes,
            values: vec![0.1, 0.2, 0.3, 0.4],
            t: 1.0,
            mass: 0.5,
        };
        let mut buf = Vec::new();
        write_density(&mut buf, &[g]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,zeta_0,zeta_1,q");
        assert_eq!(lines[2], "1,0.25,1.5,0.2");
    }
}
