//! Per-tick CSV log. Every metric in a trial report is recomputable from it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRow {
    pub trial: usize,
    pub tick: u64,
    pub time: f64,
    pub segment: usize,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    /// Plan target position and velocity.
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub tvx: f64,
    pub tvy: f64,
    pub tvz: f64,
    /// Measured force (exerted on the environment).
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    /// Applied control force.
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
    pub kpx: f64,
    pub kpy: f64,
    pub kpz: f64,
    pub lambda: f64,
    pub epsilon: Option<f64>,
    /// Predicted and measured interaction force magnitude of this tick.
    pub pred_f: Option<f64>,
    pub meas_f: f64,
    pub feature: f64,
    pub mode: Option<usize>,
    pub phase: String,
    /// Index of the contact estimate whose region holds the plan target.
    pub region: Option<usize>,
    /// Weight of the transition-phase controller in the applied command.
    pub alpha: f64,
    /// Estimate index of a contact observed on this tick.
    pub contact: Option<usize>,
    pub contact_kind: Option<String>,
    pub nx: Option<f64>,
    pub ny: Option<f64>,
    pub nz: Option<f64>,
}

impl TickRow {
    pub fn velocity(&self) -> [f64; 3] {
        [self.vx, self.vy, self.vz]
    }

    pub fn force(&self) -> [f64; 3] {
        [self.fx, self.fy, self.fz]
    }

    pub fn normal(&self) -> Option<[f64; 3]> {
        Some([self.nx?, self.ny?, self.nz?])
    }
}

pub fn write_csv<W: Write>(rows: &[TickRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Log(e.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::Log(e.to_string()))?;
    Ok(())
}

pub fn to_csv_string(rows: &[TickRow]) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| BenchError::Log(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TickRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .collect::<Result<Vec<TickRow>, _>>()
        .map_err(|e| BenchError::Log(e.to_string()))
}
