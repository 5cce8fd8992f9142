//! CSV and log artifacts.
//!
//! Floating-point columns are written with 17 significant digits, which is
//! enough for every `f64` to parse back to the identical value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use crate::dynamics::{ControlInput, HromState, JointVector, NUM_LEGS};
use crate::error::{Error, Result};
use crate::integrate::{SampleDiagnostics, Trajectory};
use crate::nlp::SolveReport;
use crate::so3::{Leg, RotationMatrix};

fn trajectory_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(["x", "y", "z"].map(|a| format!("p_b_{a}")));
    h.extend((0..9).map(|i| format!("r_b_{i}")));
    h.extend(["x", "y", "z"].map(|a| format!("omega_b_{a}")));
    h.extend(["x", "y", "z"].map(|a| format!("dp_b_{a}")));
    let per_joint = |prefix: &str| -> Vec<String> {
        Leg::ALL
            .iter()
            .flat_map(|leg| ["phi", "gamma", "r"].map(|j| format!("{prefix}_{}_{j}", leg.name())))
            .collect()
    };
    h.extend(per_joint("q_L"));
    h.extend(per_joint("dq_L"));
    h.extend(per_joint("u_L"));
    h.extend(
        Leg::ALL
            .iter()
            .flat_map(|leg| ["x", "y", "z"].map(|a| format!("u_g_{}_{a}", leg.name()))),
    );
    h.extend(["x", "y", "z"].map(|a| format!("u_T_{a}")));
    h.extend(Leg::ALL.iter().map(|leg| format!("cone_margin_{}", leg.name())));
    h.extend(per_joint("torque"));
    h.push("energy".into());
    h
}

pub const TRAJECTORY_COLUMNS: usize = 1 + 3 + 9 + 3 + 3 + 12 * 3 + 12 + 3 + 4 + 12 + 1;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one row per sample. Input columns hold the input applied from
/// that sample on (the final row repeats the last input); `u_g` columns hold
/// the sample's ground reaction forces.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    traj.validate()?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trajectory_header())?;
    for k in 0..traj.len() {
        let x = &traj.states[k];
        let u = traj.input_at(k);
        let s = &traj.samples[k];
        let mut row: Vec<f64> = Vec::with_capacity(TRAJECTORY_COLUMNS);
        row.push(traj.times[k]);
        row.extend(x.p_b.iter());
        row.extend(x.r_b.matrix().iter());
        row.extend(x.omega_b.iter());
        row.extend(x.dp_b.iter());
        row.extend(x.q_l.iter());
        row.extend(x.dq_l.iter());
        row.extend(u.u_l.iter());
        row.extend(s.grf.iter().flat_map(|f| f.iter().copied()));
        row.extend(u.u_t.iter());
        row.extend(s.cone_margin.iter());
        row.extend(s.torque.iter());
        row.push(s.energy);
        debug_assert_eq!(row.len(), TRAJECTORY_COLUMNS);
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != trajectory_header() {
        return Err(Error::Config(format!("{} does not have trajectory columns", path.display())));
    }
    let mut traj = Trajectory::default();
    let mut row_inputs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad number in {}: {e}", path.display())))?;
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = &v[at..at + n];
            at += n;
            s
        };
        let t = take(1)[0];
        let p_b = Vector3::from_column_slice(take(3));
        let r_b = RotationMatrix::from_matrix_unchecked(nalgebra::Matrix3::from_column_slice(take(9)));
        let omega_b = Vector3::from_column_slice(take(3));
        let dp_b = Vector3::from_column_slice(take(3));
        let q_l = JointVector::from_column_slice(take(12));
        let dq_l = JointVector::from_column_slice(take(12));
        let u_l = JointVector::from_column_slice(take(12));
        let g = take(12);
        let grf: [Vector3<f64>; NUM_LEGS] = std::array::from_fn(|i| Vector3::from_column_slice(&g[3 * i..3 * i + 3]));
        let u_t = Vector3::from_column_slice(take(3));
        let c = take(4);
        let cone_margin = [c[0], c[1], c[2], c[3]];
        let torque = JointVector::from_column_slice(take(12));
        let energy = take(1)[0];
        traj.times.push(t);
        traj.states.push(HromState {
            q_l,
            dq_l,
            r_b,
            p_b,
            omega_b,
            dp_b,
        });
        traj.samples.push(SampleDiagnostics {
            grf,
            cone_margin,
            torque,
            energy,
        });
        row_inputs.push(ControlInput { u_l, u_g: grf, u_t });
    }
    row_inputs.pop();
    traj.inputs = row_inputs;
    traj.validate()?;
    Ok(traj)
}

/// Single-row CSV of serializable metrics.
pub fn write_summary_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Outer-iteration history and final status of a solve.
pub fn write_solver_log(path: &Path, report: &SolveReport, header: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(
        w,
        "{:>5} {:>24} {:>12} {:>12} {:>12} {:>10} {:>6}",
        "outer", "objective", "eq_viol", "ineq_viol", "kkt", "penalty", "inner"
    )?;
    for h in &report.history {
        writeln!(
            w,
            "{:>5} {:>24.16e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.1e} {:>6}",
            h.iteration,
            h.objective,
            h.equality_violation,
            h.inequality_violation,
            h.kkt_residual,
            h.penalty,
            h.inner_iterations
        )?;
    }
    writeln!(w, "status: {}", report.status)?;
    writeln!(w, "objective: {:.16e}", report.objective)?;
    writeln!(w, "max_equality_violation: {:.6e}", report.max_equality_violation)?;
    writeln!(w, "max_inequality_violation: {:.6e}", report.max_inequality_violation)?;
    writeln!(w, "kkt_residual: {:.6e}", report.kkt_residual)?;
    writeln!(w, "outer_iterations: {}", report.iterations)?;
    writeln!(w, "inner_iterations: {}", report.inner_iterations)?;
    w.flush()?;
    Ok(())
}
