//! Motion file format.
//!
//! A motion file is UTF-8 CSV with the header
//! `id,stroke_type,label,frame,j0x,j0y,j0z,j1x,...` and one row per frame.
//! Frames of a sample are contiguous and numbered from 0; `label` is empty
//! when unknown. A sidecar `<file>.meta` holds `key: value` lines, at least
//! `frame_rate` and `joints` (comma-separated joint names).

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Dataset, Frames, MotionSample, MotionSchema, StrokeQuality, StrokeType};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["id", "stroke_type", "label", "frame"];
const AXES: [char; 3] = ['x', 'y', 'z'];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Resample every sample to this many frames. `None` keeps native
    /// lengths, which must then agree across samples.
    pub frames: Option<usize>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub(crate) fn channel_name(c: usize) -> String {
    format!("j{}{}", c / 3, AXES[c % 3])
}

fn header(joints: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..3 * joints).map(channel_name))
        .collect()
}

/// Parses `key: value` lines; blank lines and `#` comments are skipped.
pub(crate) fn parse_key_values(text: &str, location: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once(':').ok_or_else(|| Error::Ingestion {
            location: format!("{location}, line {}", n + 1),
            message: format!("expected `key: value`, got `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn schema_from_map(map: &BTreeMap<String, String>, location: &str) -> Result<MotionSchema> {
    let err = |message: String| Error::Ingestion {
        location: location.to_string(),
        message,
    };
    let frame_rate: f64 = map
        .get("frame_rate")
        .ok_or_else(|| err("missing `frame_rate`".into()))?
        .parse()
        .map_err(|_| err("`frame_rate` is not a number".into()))?;
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(err(format!("frame_rate must be positive, got {frame_rate}")));
    }
    let joints = map.get("joints").ok_or_else(|| err("missing `joints`".into()))?;
    let joint_names: Vec<String> = joints.split(',').map(|s| s.trim().to_string()).collect();
    if joint_names.iter().any(String::is_empty) {
        return Err(err("empty joint name".into()));
    }
    Ok(MotionSchema {
        joint_names,
        frame_rate,
    })
}

pub fn read_sidecar(path: &Path) -> Result<MotionSchema> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let loc = meta.display().to_string();
    schema_from_map(&parse_key_values(&text, &loc)?, &loc)
}

/// Reads a motion file and its sidecar.
pub fn load_motion_file(path: &Path, options: &LoadOptions) -> Result<Dataset> {
    let schema = read_sidecar(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let samples = parse_motion_csv(&text, &path.display().to_string(), 0, Some(schema.num_joints()))?;
    finish(samples, schema, options)
}

pub(crate) fn finish(samples: Vec<MotionSample>, schema: MotionSchema, options: &LoadOptions) -> Result<Dataset> {
    let samples = match options.frames {
        Some(t) => samples
            .into_iter()
            .map(|s| {
                Ok(MotionSample {
                    frames: s.frames.resample(t)?,
                    ..s
                })
            })
            .collect::<Result<_>>()?,
        None => samples,
    };
    Dataset::new(samples, schema)
}

/// Parses CSV rows in the motion schema. `line_offset` is added to reported
/// line numbers for tables embedded in larger files.
pub fn parse_motion_csv(
    text: &str,
    location: &str,
    line_offset: usize,
    expect_joints: Option<usize>,
) -> Result<Vec<MotionSample>> {
    let at = |line: usize, col: Option<&str>| match col {
        Some(c) => format!("{location}, line {}, column `{c}`", line + line_offset),
        None => format!("{location}, line {}", line + line_offset),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingestion {
            location: at(1, None),
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if cols.get(i) != Some(name) {
            return Err(Error::Ingestion {
                location: at(1, Some(name)),
                message: format!("missing column `{name}` at position {i}"),
            });
        }
    }
    let channel_cols = cols.len() - FIXED_COLUMNS.len();
    if channel_cols == 0 || !channel_cols.is_multiple_of(3) {
        return Err(Error::Ingestion {
            location: at(1, None),
            message: format!("{channel_cols} coordinate columns is not a positive multiple of 3"),
        });
    }
    for (c, name) in cols[FIXED_COLUMNS.len()..].iter().enumerate() {
        let want = channel_name(c);
        if *name != want {
            return Err(Error::Ingestion {
                location: at(1, Some(&want)),
                message: format!("expected column `{want}`, found `{name}`"),
            });
        }
    }
    let joints = channel_cols / 3;
    if let Some(j) = expect_joints {
        if j != joints {
            return Err(Error::Ingestion {
                location: at(1, None),
                message: format!("metadata lists {j} joints but the header has {joints}"),
            });
        }
    }

    struct Partial {
        id: String,
        stroke_type: StrokeType,
        label: Option<StrokeQuality>,
        values: Vec<f64>,
        frames: usize,
    }
    let mut done: Vec<MotionSample> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut current: Option<Partial> = None;
    let flush = |p: Partial, done: &mut Vec<MotionSample>| -> Result<()> {
        done.push(MotionSample {
            frames: Frames::new(p.frames, channel_cols, p.values)?,
            id: p.id,
            stroke_type: p.stroke_type,
            label: p.label,
        });
        Ok(())
    };

    for (r, rec) in reader.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| Error::Ingestion {
            location: at(line, None),
            message: e.to_string(),
        })?;
        if rec.len() != cols.len() {
            return Err(Error::Ingestion {
                location: at(line, None),
                message: format!("{} fields, header has {}", rec.len(), cols.len()),
            });
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Ingestion {
                location: at(line, Some("id")),
                message: "empty sample id".into(),
            });
        }
        let stroke_type: StrokeType = rec[1].parse().map_err(|e: Error| Error::Ingestion {
            location: at(line, Some("stroke_type")),
            message: e.to_string(),
        })?;
        let label = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].parse::<StrokeQuality>().map_err(|e| Error::Ingestion {
                location: at(line, Some("label")),
                message: e.to_string(),
            })?)
        };
        let frame: usize = rec[3].parse().map_err(|_| Error::Ingestion {
            location: at(line, Some("frame")),
            message: format!("`{}` is not a frame index", &rec[3]),
        })?;

        let starts_new = current.as_ref().is_none_or(|p| p.id != id);
        if starts_new {
            if let Some(p) = current.take() {
                flush(p, &mut done)?;
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Ingestion {
                    location: at(line, Some("id")),
                    message: format!("frames of sample `{id}` are not contiguous"),
                });
            }
            current = Some(Partial {
                id: id.clone(),
                stroke_type,
                label,
                values: Vec::new(),
                frames: 0,
            });
        }
        let p = current.as_mut().expect("set above");
        if frame != p.frames {
            return Err(Error::Ingestion {
                location: at(line, Some("frame")),
                message: format!("sample `{id}`: expected frame {}, found {frame}", p.frames),
            });
        }
        if p.label != label || p.stroke_type != stroke_type {
            return Err(Error::Ingestion {
                location: at(line, None),
                message: format!("sample `{id}`: label or stroke type changes between frames"),
            });
        }
        for c in 0..channel_cols {
            let raw = &rec[FIXED_COLUMNS.len() + c];
            let v: f64 = raw.parse().map_err(|_| Error::Ingestion {
                location: at(line, Some(&channel_name(c))),
                message: format!("sample `{id}`, channel {}: `{raw}` is not a number", channel_name(c)),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    location: at(line, Some(&channel_name(c))),
                    message: format!("sample `{id}`, channel {}: non-finite value `{raw}`", channel_name(c)),
                });
            }
            p.values.push(v);
        }
        p.frames += 1;
    }
    if let Some(p) = current.take() {
        flush(p, &mut done)?;
    }
    Ok(done)
}

/// Writes CSV rows (header included). Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_motion_rows(out: &mut impl Write, samples: &[MotionSample], joints: usize) -> std::io::Result<()> {
    writeln!(out, "{}", header(joints).join(","))?;
    for s in samples {
        let label = s.label.map(|l| l.as_str()).unwrap_or("");
        for (t, row) in s.frames.rows().enumerate() {
            write!(out, "{},{},{},{}", s.id, s.stroke_type, label, t)?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub(crate) fn schema_lines(schema: &MotionSchema) -> String {
    format!(
        "frame_rate: {}\njoints: {}\n",
        schema.frame_rate,
        schema.joint_names.join(",")
    )
}

/// Writes `path` and its `.meta` sidecar.
pub fn write_motion_file(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    write_motion_rows(&mut buf, &dataset.samples, dataset.schema.num_joints()).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let meta = sidecar_path(path);
    fs::write(&meta, schema_lines(&dataset.schema)).map_err(|e| Error::io(&meta, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, csv: &str, meta: &str) -> PathBuf {
        let p = dir.join("m.csv");
        fs::write(&p, csv).unwrap();
        fs::write(sidecar_path(&p), meta).unwrap();
        p
    }

    fn csv_for(samples: usize, joints: usize, frames: usize) -> String {
        let mut s = header(joints).join(",");
        s.push('\n');
        for i in 0..samples {
            for t in 0..frames {
                s.push_str(&format!("s{i},forehand_clear,good,{t}"));
                for c in 0..3 * joints {
                    s.push_str(&format!(",{}", (t * 10 + c) as f64 * 0.01));
                }
                s.push('\n');
            }
        }
        s
    }

    #[test]
    fn shape_contract() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &csv_for(2, 3, 100), "frame_rate: 100\njoints: a,b,c\n");
        let ds = load_motion_file(&p, &LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].frames.shape(), (100, 9));
        assert_eq!(ds.samples[1].label, Some(StrokeQuality::Good));
        assert_eq!(ds.schema.joint_names, vec!["a", "b", "c"]);
    }

    #[test]
    fn nan_cell_names_sample_and_channel() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = csv_for(2, 1, 3);
        csv = csv.replacen(
            "s1,forehand_clear,good,1,0.1,0.11,",
            "s1,forehand_clear,good,1,0.1,NaN,",
            1,
        );
        let p = write(dir.path(), &csv, "frame_rate: 60\njoints: w\n");
        let err = load_motion_file(&p, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("s1") && err.contains("j0y"), "{err}");
    }

    #[test]
    fn missing_column_and_joint_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "id,stroke_type,frame,j0x,j0y,j0z\n",
            "frame_rate: 60\njoints: w\n",
        );
        let err = load_motion_file(&p, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Ingestion { .. }));
        let p = write(dir.path(), &csv_for(1, 2, 3), "frame_rate: 60\njoints: w\n");
        let err = load_motion_file(&p, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("1 joints"), "{err}");
    }

    #[test]
    fn non_contiguous_frames_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "id,stroke_type,label,frame,j0x,j0y,j0z\n\
                   a,forehand_clear,,0,1,2,3\n\
                   b,forehand_clear,,0,1,2,3\n\
                   a,forehand_clear,,1,1,2,3\n";
        let p = write(dir.path(), csv, "frame_rate: 60\njoints: w\n");
        let err = load_motion_file(&p, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("contiguous") && err.contains("line 4"), "{err}");
    }

    #[test]
    fn resampling_on_load_keeps_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &csv_for(1, 1, 200), "frame_rate: 200\njoints: w\n");
        let ds = load_motion_file(&p, &LoadOptions { frames: Some(60) }).unwrap();
        let f = &ds.samples[0].frames;
        assert_eq!(f.num_frames(), 60);
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(f.get(59, 2), (1990 + 2) as f64 * 0.01);
        assert_eq!(ds.schema.frame_rate, 200.0);
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![MotionSample {
            id: "x".into(),
            stroke_type: StrokeType::BackhandDrive,
            label: None,
            frames: Frames::new(2, 3, vec![0.1, 1.0 / 3.0, -2e-17, 5.0, 6.5, 1e300]).unwrap(),
        }];
        let ds = Dataset::new(samples, MotionSchema::generic(1, 50.0)).unwrap();
        let p = dir.path().join("out.csv");
        write_motion_file(&p, &ds).unwrap();
        let back = load_motion_file(&p, &LoadOptions::default()).unwrap();
        assert_eq!(back, ds);
    }
}
