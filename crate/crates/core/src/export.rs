//! Plot-ready output: trajectory CSV, event sidecar and candidate tables.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Event, EventKind, Trajectory};
use crate::model::Scenario;
use crate::optimizer::CandidateValue;
use crate::scalar::Scalar;

/// Fixed header of the trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "t,s,n,r,e,h";

/// One row per sample: time, basal area, count, density index, thinning rate
/// and dominant height.
pub fn write_trajectory_csv<F: Scalar, W: Write>(
    scenario: &Scenario<F>,
    traj: &Trajectory<F>,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for sample in &traj.samples {
        let st = sample.state;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            st.t,
            st.s,
            st.n,
            sample.r,
            sample.e,
            scenario.env.height(st.t)
        )?;
    }
    Ok(())
}

/// Event sidecar of a trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog<F> {
    pub policy: String,
    pub horizon: F,
    pub step: F,
    pub validity_end: F,
    /// Reached the horizon without leaving the validity domain.
    pub completed: bool,
    pub events: Vec<Event<F>>,
}

impl<F: Scalar> EventLog<F> {
    pub fn new(policy: String, traj: &Trajectory<F>) -> Self {
        Self {
            policy,
            horizon: traj.horizon,
            step: traj.step,
            validity_end: traj.validity_end,
            completed: traj.completed(),
            events: traj.events.clone(),
        }
    }

    /// The run stopped before the horizon on a constraint.
    pub fn constraint_exit(&self) -> bool {
        !self.completed
            && self
                .events
                .iter()
                .any(|e| matches!(e.kind, EventKind::ExitPoint | EventKind::RdiHitOne))
    }
}

/// `label,value` rows; infeasible candidates have an empty value.
pub fn write_candidates_csv<F: Scalar, W: Write>(candidates: &[CandidateValue<F>], mut out: W) -> io::Result<()> {
    writeln!(out, "label,value")?;
    for c in candidates {
        match c.value {
            Some(v) => writeln!(out, "\"{}\",{v}", c.label)?,
            None => writeln!(out, "\"{}\",", c.label)?,
        }
    }
    Ok(())
}
