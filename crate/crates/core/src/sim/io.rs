use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lmb::StateVector;

use super::{GroundTruthLog, SimScan, TruthStep};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub step: u64,
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub step: u64,
    pub sensor_id: u32,
    pub meas_x: f64,
    pub meas_y: f64,
    pub is_clutter: bool,
}

pub fn write_truth_csv<W: Write>(truth: &GroundTruthLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for step in truth {
        for (id, s) in &step.vehicles {
            w.serialize(TruthRow { step: step.step, vehicle_id: *id, x: s.x, y: s.y, v: s.v, phi: s.phi, omega: s.omega })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scans_csv<W: Write>(scans: &[SimScan], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scans {
        for (z, clutter) in s.scan.measurements.iter().zip(&s.is_clutter) {
            w.serialize(ScanRow {
                step: s.scan.timestamp,
                sensor_id: s.scan.sensor_id,
                meas_x: z.x,
                meas_y: z.y,
                is_clutter: *clutter,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a truth CSV back; steps without rows are absent from the log.
pub fn read_truth_csv<R: Read>(input: R) -> Result<GroundTruthLog> {
    let mut log: GroundTruthLog = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: TruthRow = row?;
        let state = StateVector { x: r.x, y: r.y, v: r.v, phi: r.phi, omega: r.omega };
        match log.last_mut() {
            Some(step) if step.step == r.step => step.vehicles.push((r.vehicle_id, state)),
            _ => log.push(TruthStep { step: r.step, vehicles: vec![(r.vehicle_id, state)] }),
        }
    }
    Ok(log)
}

pub fn read_scans_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Into::into)).collect()
}
