//! Trajectory CSV: one row per round, floats at 17 significant digits.
//!
//! Columns: `k, omega, theta, theta_hat, e_theta, u, m, x_1..x_n,
//! xhat_1..xhat_n, y_1..y_n, ell_1..ell_n, flow_gap`, optionally followed
//! by `e_lower, e_upper`.

use std::io::Write;

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

pub fn csv_header(n: usize, with_envelope: bool) -> Vec<String> {
    let mut cols: Vec<String> = ["k", "omega", "theta", "theta_hat", "e_theta", "u", "m"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["x", "xhat", "y", "ell"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.push("flow_gap".into());
    if with_envelope {
        cols.push("e_lower".into());
        cols.push("e_upper".into());
    }
    cols
}

#[inline]
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `trajectory` as CSV. `state_labels` names the `omega` column;
/// `envelope`, when given, must have one `(lower, upper)` pair per row.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    state_labels: &[String],
    trajectory: &[TrajectoryRecord],
    envelope: Option<&[(f64, f64)]>,
) -> Result<()> {
    let n = trajectory.first().map_or(0, |r| r.x.len());
    if let Some(env) = envelope {
        if env.len() != trajectory.len() {
            return Err(Error::config(format!(
                "envelope has {} rows, trajectory has {}",
                env.len(),
                trajectory.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(n, envelope.is_some()))?;
    let mut row: Vec<String> = Vec::new();
    for (idx, rec) in trajectory.iter().enumerate() {
        row.clear();
        row.push(rec.k.to_string());
        row.push(
            state_labels
                .get(rec.omega)
                .cloned()
                .unwrap_or_else(|| rec.omega.to_string()),
        );
        for v in [rec.theta, rec.theta_hat, rec.e_theta, rec.u, rec.m] {
            row.push(fmt17(v));
        }
        for vec in [&rec.x, &rec.x_hat, &rec.y, &rec.ell] {
            row.extend(vec.iter().map(|v| fmt17(*v)));
        }
        row.push(fmt17(rec.flow_gap));
        if let Some(env) = envelope {
            row.push(fmt17(env[idx].0));
            row.push(fmt17(env[idx].1));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
