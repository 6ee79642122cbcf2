use std::io::Write;

use crate::error::Result;
use crate::regularization::{kcheck_value, physical_state, Chart, MoserChartPoint};

use super::trajectory::{TrajPoint, Trajectory};
use super::Frame;

/// Rows with `|a_S|` below this are written as at-collision rows: physical
/// columns empty, chart coordinates filled.
pub const AT_COLLISION_TOL: f64 = 1e-8;

pub const CSV_HEADER: &str = "t,chart,q1,q2,p1,p2,H,Kcheck,a1,a2,b1,b2";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(traj: &Trajectory, p: &TrajPoint) -> Result<String> {
    let model = traj.model();
    let level = &model.level;
    let mut cells: Vec<String> = vec![num(p.t), p.frame.name().to_string()];
    match p.chart_point() {
        None => {
            let st = p.physical()?;
            let h = model.conserved(Frame::Physical, &p.y)?;
            let kc = kcheck_value(&MoserChartPoint::from_physical(&st), level)?;
            for v in st.to_array() {
                cells.push(num(v));
            }
            cells.push(num(h));
            cells.push(num(kc));
            cells.extend(std::iter::repeat_n(String::new(), 4));
        }
        Some(pt) => {
            let south_norm = pt.south_base_norm();
            let kc = kcheck_value(&pt, level)?;
            if south_norm < AT_COLLISION_TOL {
                cells.extend(std::iter::repeat_n(String::new(), 5));
            } else {
                let st = physical_state(&pt)?;
                let h = crate::dynamics::hamiltonian(&st, &level.params)?;
                for v in st.to_array() {
                    cells.push(num(v));
                }
                cells.push(num(h));
            }
            cells.push(num(kc));
            let shown = if south_norm < AT_COLLISION_TOL {
                pt.in_chart(Chart::South)?
            } else {
                pt
            };
            for v in shown.to_array() {
                cells.push(num(v));
            }
        }
    }
    Ok(cells.join(","))
}

/// Writes the trajectory samples, merged with `extra` points (for example
/// located collision passages), as CSV. `preamble` lines are written first,
/// each prefixed with `# `.
pub fn write_csv<W: Write>(traj: &Trajectory, extra: &[TrajPoint], preamble: &[String], out: &mut W) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    let mut points = traj.samples();
    points.extend_from_slice(extra);
    points.sort_by(|a, b| a.t.total_cmp(&b.t));
    for p in &points {
        writeln!(out, "{}", row(traj, p)?)?;
    }
    Ok(())
}
