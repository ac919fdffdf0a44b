//! File formats for pointing datasets, trained models and actuator layouts.
//!
//! * dataset: CSV `participant_id,actuator_id,px,py,pz,theta,phi`
//! * layout:  CSV `index,theta,phi,rx,ry,rz,px,py,pz`
//! * model:   JSON `{"format": "vibroshield-mlp", "version": 1, ...}`

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::MappingSample;
use super::mlp::{MlpModel, HIDDEN_LAYERS, HIDDEN_WIDTH, OUTPUT_DIM};
use crate::feedback::{direction_to_spherical, ActuatorLayout, LayoutError};
use crate::geometry::Vec3;

pub const MODEL_FORMAT: &str = "vibroshield-mlp";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    participant_id: u32,
    actuator_id: u32,
    px: f64,
    py: f64,
    pz: f64,
    theta: f64,
    phi: f64,
}

pub fn write_dataset<W: Write>(writer: W, samples: &[MappingSample]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(DatasetRow {
            participant_id: s.participant_id,
            actuator_id: s.actuator_id,
            px: s.position.x,
            py: s.position.y,
            pz: s.position.z,
            theta: s.reported_theta,
            phi: s.reported_phi,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<MappingSample>, FormatError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: DatasetRow = row?;
        if !(row.theta > 0.0 && row.theta < std::f64::consts::PI) {
            return Err(FormatError::Invalid(format!("theta {} outside (0, pi)", row.theta)));
        }
        if !(row.phi > -std::f64::consts::PI && row.phi <= std::f64::consts::PI) {
            return Err(FormatError::Invalid(format!("phi {} outside (-pi, pi]", row.phi)));
        }
        out.push(MappingSample {
            participant_id: row.participant_id,
            actuator_id: row.actuator_id,
            position: Vec3::new(row.px, row.py, row.pz),
            reported_theta: row.theta,
            reported_phi: row.phi,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutRow {
    index: usize,
    theta: f64,
    phi: f64,
    rx: f64,
    ry: f64,
    rz: f64,
    px: Option<f64>,
    py: Option<f64>,
    pz: Option<f64>,
}

pub fn write_layout<W: Write>(writer: W, layout: &ActuatorLayout) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    for (index, r) in layout.directions().iter().enumerate() {
        let (theta, phi) = direction_to_spherical(r);
        let p = layout.positions().map(|ps| ps[index]);
        w.serialize(LayoutRow {
            index,
            theta,
            phi,
            rx: r.x,
            ry: r.y,
            rz: r.z,
            px: p.map(|p| p.x),
            py: p.map(|p| p.y),
            pz: p.map(|p| p.z),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_layout<R: Read>(reader: R) -> Result<ActuatorLayout, FormatError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut dirs = Vec::new();
    let mut positions = Vec::new();
    for (expected, row) in r.deserialize().enumerate() {
        let row: LayoutRow = row?;
        if row.index != expected {
            return Err(FormatError::Invalid(format!(
                "layout rows must be in index order: expected {expected}, got {}",
                row.index
            )));
        }
        dirs.push(Vec3::new(row.rx, row.ry, row.rz));
        if let (Some(x), Some(y), Some(z)) = (row.px, row.py, row.pz) {
            positions.push(Vec3::new(x, y, z));
        }
    }
    let positions = if positions.is_empty() {
        None
    } else {
        Some(positions)
    };
    Ok(ActuatorLayout::new(dirs, positions)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    hidden_layers: usize,
    hidden_width: usize,
    output_dim: usize,
    model: MlpModel,
}

pub fn write_model<W: Write>(writer: W, model: &MlpModel) -> Result<(), FormatError> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        hidden_layers: HIDDEN_LAYERS,
        hidden_width: HIDDEN_WIDTH,
        output_dim: OUTPUT_DIM,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<MlpModel, FormatError> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(FormatError::Invalid(format!(
            "unsupported model file {} v{}",
            file.format, file.version
        )));
    }
    if (file.hidden_layers, file.hidden_width, file.output_dim) != (HIDDEN_LAYERS, HIDDEN_WIDTH, OUTPUT_DIM) {
        return Err(FormatError::Invalid("architecture mismatch".into()));
    }
    let net = &file.model.network;
    let width = net.encoding.width();
    let mut expected = vec![width];
    expected.extend([HIDDEN_WIDTH; HIDDEN_LAYERS]);
    expected.push(OUTPUT_DIM);
    let ok = net.weights.len() == expected.len() - 1
        && net.weights.iter().zip(expected.windows(2)).all(|(w, d)| w.dim() == (d[0], d[1]))
        && net.biases.iter().zip(&expected[1..]).all(|(b, &d)| b.len() == d);
    if !ok {
        return Err(FormatError::Invalid("parameter shapes do not match the architecture".into()));
    }
    let finite = net.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
        && net.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(FormatError::Invalid("non-finite parameter".into()));
    }
    Ok(file.model)
}
