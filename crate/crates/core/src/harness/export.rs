//! Paired-motion file for side-by-side playback of an original stroke and
//! its counterfactual.
//!
//! ```text
//! joints: wrist,elbow,...
//! frame_rate: 60
//! frames: 60
//! method: latent
//! target: good
//! valid: true
//! iterations: 31
//! final_prob: 0.52
//! [original]
//! <motion CSV table>
//! [counterfactual]
//! <motion CSV table>
//! ```
//!
//! Both tables are in meters (denormalised) and use the motion file schema.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::cfengine::CFResult;
use crate::dataset::io::{parse_key_values, parse_motion_csv, schema_from_map, write_motion_rows};
use crate::dataset::{MotionSample, MotionSchema, Normalization};
use crate::error::{Error, Result};

const ORIGINAL: &str = "[original]";
const COUNTERFACTUAL: &str = "[counterfactual]";

/// Writes the paired-motion file. `original` and the counterfactual are in
/// the normalised space of `normalization`.
pub fn export_motion(
    original: &MotionSample,
    cf: &CFResult,
    normalization: &Normalization,
    schema: &MotionSchema,
    path: &Path,
) -> Result<()> {
    if original.frames.shape() != cf.counterfactual.shape() {
        return Err(Error::shape(
            "export_motion",
            format!("{:?}", original.frames.shape()),
            format!("{:?}", cf.counterfactual.shape()),
        ));
    }
    if schema.num_channels() != original.frames.num_channels() {
        return Err(Error::shape(
            "export_motion",
            schema.num_channels(),
            original.frames.num_channels(),
        ));
    }
    let orig = normalization.invert(original)?;
    let counter = MotionSample {
        id: format!("{}-cf", original.id),
        stroke_type: original.stroke_type,
        label: None,
        frames: normalization.invert_frames(&cf.counterfactual)?,
    };
    let mut buf = Vec::new();
    let io = |e| Error::io(path, e);
    let mut header = vec![
        ("joints", schema.joint_names.join(",")),
        ("frame_rate", schema.frame_rate.to_string()),
        ("frames", orig.frames.num_frames().to_string()),
        ("method", cf.method.to_string()),
        ("target", cf.target.to_string()),
        ("valid", cf.valid.to_string()),
        ("iterations", cf.iterations.to_string()),
        ("final_prob", cf.final_prob.to_string()),
    ];
    if let Some(n) = &cf.neighbor_id {
        header.push(("neighbor", n.clone()));
    }
    use std::io::Write;
    for (k, v) in header {
        writeln!(buf, "{k}: {v}").map_err(io)?;
    }
    writeln!(buf, "{ORIGINAL}").map_err(io)?;
    write_motion_rows(&mut buf, std::slice::from_ref(&orig), schema.num_joints()).map_err(io)?;
    writeln!(buf, "{COUNTERFACTUAL}").map_err(io)?;
    write_motion_rows(&mut buf, std::slice::from_ref(&counter), schema.num_joints()).map_err(io)?;
    fs::write(path, buf).map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedMotion {
    pub header: BTreeMap<String, String>,
    pub schema: MotionSchema,
    pub valid: bool,
    /// In meters.
    pub original: MotionSample,
    /// In meters.
    pub counterfactual: MotionSample,
}

/// Reads a file written by [`export_motion`].
pub fn read_paired_motion(path: &Path) -> Result<PairedMotion> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let loc = path.display().to_string();
    let lines: Vec<&str> = text.lines().collect();
    let find = |tag: &str| {
        lines
            .iter()
            .position(|l| l.trim() == tag)
            .ok_or_else(|| Error::Ingestion {
                location: loc.clone(),
                message: format!("missing `{tag}` section"),
            })
    };
    let a = find(ORIGINAL)?;
    let b = find(COUNTERFACTUAL)?;
    if b < a {
        return Err(Error::Ingestion {
            location: loc,
            message: "`[counterfactual]` precedes `[original]`".into(),
        });
    }
    let header = parse_key_values(&lines[..a].join("\n"), &loc)?;
    let schema = schema_from_map(&header, &loc)?;
    let valid = match header.get("valid").map(String::as_str) {
        Some("true") => true,
        Some("false") => false,
        other => {
            return Err(Error::Ingestion {
                location: loc,
                message: format!("`valid` must be true or false, got {other:?}"),
            })
        }
    };
    let section = |from: usize, to: usize| -> Result<MotionSample> {
        let body = lines[from + 1..to].join("\n");
        let mut samples = parse_motion_csv(&body, &loc, from + 1, Some(schema.num_joints()))?;
        if samples.len() != 1 {
            return Err(Error::Ingestion {
                location: format!("{loc}, line {}", from + 1),
                message: format!("expected one trajectory, found {}", samples.len()),
            });
        }
        Ok(samples.remove(0))
    };
    let original = section(a, b)?;
    let counterfactual = section(b, lines.len())?;
    Ok(PairedMotion {
        header,
        schema,
        valid,
        original,
        counterfactual,
    })
}
