//! Line-delimited trajectory dump: one JSON record per observed body per
//! frame, then a single summary record. Reals are written in scientific
//! notation with nine significant digits so dumps are byte-stable.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Scene, Trajectory};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub step: u32,
    pub body_role: String,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub angle: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpSummary {
    pub collision_count: u32,
    pub rolling_steps: Vec<u32>,
    pub terminated: bool,
    pub termination_step: Option<u32>,
}

/// Formats a real with nine significant digits.
pub(crate) fn sig9(x: f64) -> String {
    if x == 0.0 {
        // Normalise -0.0 so identical states always print identically.
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

pub fn write_trajectory_dump<W: Write>(out: &mut W, scene: &Scene, traj: &Trajectory) -> Result<()> {
    for frame in &traj.frames {
        for (slot, s) in frame.states.iter().enumerate() {
            let role = &scene.bodies[traj.bodies[slot]].role;
            writeln!(
                out,
                "{{\"step\":{},\"body_role\":{},\"x\":{},\"y\":{},\"vx\":{},\"vy\":{},\"angle\":{},\"omega\":{}}}",
                frame.step,
                serde_json::to_string(role)?,
                sig9(s.position.x),
                sig9(s.position.y),
                sig9(s.velocity.x),
                sig9(s.velocity.y),
                sig9(s.angle),
                sig9(s.angular_velocity),
            )?;
        }
    }
    let summary = DumpSummary {
        collision_count: traj.ball_collisions,
        rolling_steps: traj.rolling_steps.clone(),
        terminated: traj.terminated_by_goal,
        termination_step: traj.termination_step,
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    Ok(())
}

/// Reads a dump back into its frame records and summary.
pub fn read_trajectory_dump<R: BufRead>(input: R) -> Result<(Vec<DumpRecord>, DumpSummary)> {
    let mut records = Vec::new();
    let mut summary = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(Error::Parse("records after summary".into()));
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        if value.get("collision_count").is_some() {
            summary = Some(serde_json::from_value(value)?);
        } else {
            records.push(serde_json::from_value(value)?);
        }
    }
    let summary = summary.ok_or_else(|| Error::Parse("missing summary record".into()))?;
    Ok((records, summary))
}
