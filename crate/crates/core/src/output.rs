//! Plain-text serialization of trajectories: CSV sample tables and a
//! JSON-friendly run summary. Floats use the shortest round-trip form, so
//! a fixed configuration reproduces byte-identical output.

use crate::chart::coord_names;
use crate::dynamics::{FlowStatus, Trajectory};
use crate::error::{Error, Result};

/// CSV table of a trajectory's samples: header `t` plus the coordinate
/// names for the given shape, one row per sample. An empty trajectory
/// yields the header alone, which is why the shape is passed explicitly.
pub fn trajectory_csv(traj: &Trajectory, level: u8, n: usize) -> Result<String> {
    if let Some(p) = traj.points.first() {
        if p.level() != level || p.n() != n {
            return Err(Error::LevelMismatch(format!(
                "trajectory holds level-{} points (n = {}), table requested for level {} (n = {})",
                p.level(),
                p.n(),
                level,
                n
            )));
        }
    }
    let mut out = String::from("t");
    for name in coord_names(level, n) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (t, p) in traj.times.iter().zip(&traj.points) {
        out.push_str(&format!("{t}"));
        for c in p.coords() {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Summary of a run for the JSON sidecar: shape, status, sample count,
/// covered time range, and the optional step-halving error estimate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrajectoryRecord {
    pub level: u8,
    pub n: usize,
    pub status: FlowStatus,
    pub samples: usize,
    pub t_first: Option<f64>,
    pub t_last: Option<f64>,
    pub error_estimate: Option<f64>,
}

impl TrajectoryRecord {
    pub fn new(traj: &Trajectory, level: u8, n: usize) -> Self {
        Self {
            level,
            n,
            status: traj.status,
            samples: traj.points.len(),
            t_first: traj.times.first().copied(),
            t_last: traj.times.last().copied(),
            error_estimate: traj.error_estimate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::BundlePoint;

    fn short_traj() -> Trajectory {
        Trajectory {
            times: vec![0.0, 0.5],
            points: vec![
                BundlePoint::new(1, 1, vec![0.0, 1.0]).unwrap(),
                BundlePoint::new(1, 1, vec![0.125, 0.25]).unwrap(),
            ],
            status: FlowStatus::Completed,
            error_estimate: None,
        }
    }

    #[test]
    fn csv_layout_and_shortest_floats() {
        let csv = trajectory_csv(&short_traj(), 1, 1).unwrap();
        assert_eq!(csv, "t,x1,y1\n0,0,1\n0.5,0.125,0.25\n");
    }

    #[test]
    fn empty_trajectory_gives_header_only() {
        let traj = Trajectory {
            times: vec![],
            points: vec![],
            status: FlowStatus::RegularityLost { t: 0.0 },
            error_estimate: None,
        };
        let csv = trajectory_csv(&traj, 2, 2).unwrap();
        assert_eq!(csv, "t,x1,x2,y1,y2,X1,X2,Y1,Y2\n");
        let rec = TrajectoryRecord::new(&traj, 2, 2);
        assert_eq!(rec.samples, 0);
        assert!(rec.t_first.is_none());
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"regularity_lost\""), "{json}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(trajectory_csv(&short_traj(), 0, 1).is_err());
    }
}
