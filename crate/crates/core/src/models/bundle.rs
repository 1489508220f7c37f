//! Binary model bundle.
//!
//! All integers and floats are little-endian. `str` is a `u32` byte length
//! followed by UTF-8 bytes.
//!
//! ```text
//! magic       8 bytes   "MCFBNDL\0"
//! version     u32       1
//! frames      u32       T
//! channels    u32       D
//! latent      u32       L
//! frame_rate  f64
//! joints      u32 n, then n × str
//! manifest    u32 n, then n × (str key, str value), keys sorted
//! arch        str       JSON {"classifier_arch", "classifier", "encoder", "decoder"}
//! norm        u32 d, d × f64 mean, d × f64 scale,
//!             u32 m, m × u32 degenerate channel, u32 k, k × str fitted id
//! params      classifier block, then autoencoder block:
//!             u32 count, then per tensor (sorted by name):
//!             str name, u32 ndim, ndim × u64 dim, prod(dims) × f64 value
//! trailer     8 bytes   "MCFBEND\0"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Autoencoder, Classifier, ClassifierArch};
use crate::dataset::{MotionSchema, Normalization};
use crate::error::{Error, Result};
use crate::ndiff::{ParameterSet, Sequential, Tensor};

pub const BUNDLE_MAGIC: &[u8; 8] = b"MCFBNDL\0";
pub const BUNDLE_TRAILER: &[u8; 8] = b"MCFBEND\0";
pub const BUNDLE_VERSION: u32 = 1;

/// Trained autoencoder and classifier plus everything needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub autoencoder: Autoencoder,
    pub classifier: Classifier,
    pub normalization: Normalization,
    pub schema: MotionSchema,
    pub manifest: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ArchBlock {
    classifier_arch: ClassifierArch,
    classifier: Sequential,
    encoder: Sequential,
    decoder: Sequential,
}

impl ModelBundle {
    pub fn new(
        autoencoder: Autoencoder,
        classifier: Classifier,
        normalization: Normalization,
        schema: MotionSchema,
        manifest: BTreeMap<String, String>,
    ) -> Result<Self> {
        let b = ModelBundle {
            autoencoder,
            classifier,
            normalization,
            schema,
            manifest,
        };
        b.check_schema()?;
        Ok(b)
    }

    pub fn frames(&self) -> usize {
        self.autoencoder.frames
    }

    pub fn channels(&self) -> usize {
        self.autoencoder.channels
    }

    pub fn latent_dim(&self) -> usize {
        self.autoencoder.latent_dim
    }

    fn check_schema(&self) -> Result<()> {
        let d = self.autoencoder.channels;
        let ok = self.classifier.channels == d
            && self.classifier.frames == self.autoencoder.frames
            && self.normalization.num_channels() == d
            && self.schema.num_channels() == d;
        if !ok {
            return Err(Error::shape(
                "bundle",
                format!("consistent T={} D={d}", self.autoencoder.frames),
                format!(
                    "classifier {}x{}, normalization {}, schema {} joints",
                    self.classifier.frames,
                    self.classifier.channels,
                    self.normalization.num_channels(),
                    self.schema.num_joints()
                ),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Vec::new();
        w.extend_from_slice(BUNDLE_MAGIC);
        put_u32(&mut w, BUNDLE_VERSION);
        put_u32(&mut w, self.frames() as u32);
        put_u32(&mut w, self.channels() as u32);
        put_u32(&mut w, self.latent_dim() as u32);
        w.extend_from_slice(&self.schema.frame_rate.to_le_bytes());
        put_u32(&mut w, self.schema.joint_names.len() as u32);
        for j in &self.schema.joint_names {
            put_str(&mut w, j);
        }
        put_u32(&mut w, self.manifest.len() as u32);
        for (k, v) in &self.manifest {
            put_str(&mut w, k);
            put_str(&mut w, v);
        }
        let arch = ArchBlock {
            classifier_arch: self.classifier.arch,
            classifier: self.classifier.net.clone(),
            encoder: self.autoencoder.encoder.clone(),
            decoder: self.autoencoder.decoder.clone(),
        };
        let arch = serde_json::to_string(&arch).map_err(|e| Error::CorruptBundle(e.to_string()))?;
        put_str(&mut w, &arch);
        let n = &self.normalization;
        put_u32(&mut w, n.mean.len() as u32);
        for v in n.mean.iter().chain(&n.scale) {
            w.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(&mut w, n.degenerate.len() as u32);
        for &c in &n.degenerate {
            put_u32(&mut w, c as u32);
        }
        put_u32(&mut w, n.fitted_on.len() as u32);
        for id in &n.fitted_on {
            put_str(&mut w, id);
        }
        put_params(&mut w, &self.classifier.params);
        put_params(&mut w, &self.autoencoder.params);
        w.extend_from_slice(BUNDLE_TRAILER);
        Ok(w)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != BUNDLE_MAGIC {
            return Err(Error::CorruptBundle("bad magic".into()));
        }
        let version = r.u32()?;
        if version != BUNDLE_VERSION {
            return Err(Error::BundleVersion {
                found: version,
                expected: BUNDLE_VERSION,
            });
        }
        let frames = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let latent = r.u32()? as usize;
        let frame_rate = r.f64()?;
        let n_joints = r.u32()? as usize;
        let joint_names = (0..n_joints).map(|_| r.string()).collect::<Result<_>>()?;
        let n_manifest = r.u32()? as usize;
        let mut manifest = BTreeMap::new();
        for _ in 0..n_manifest {
            let k = r.string()?;
            let v = r.string()?;
            manifest.insert(k, v);
        }
        let arch: ArchBlock =
            serde_json::from_str(&r.string()?).map_err(|e| Error::CorruptBundle(format!("architecture block: {e}")))?;
        let d = r.u32()? as usize;
        let mean = (0..d).map(|_| r.f64()).collect::<Result<_>>()?;
        let scale = (0..d).map(|_| r.f64()).collect::<Result<_>>()?;
        let m = r.u32()? as usize;
        let degenerate = (0..m).map(|_| r.u32().map(|c| c as usize)).collect::<Result<_>>()?;
        let k = r.u32()? as usize;
        let fitted_on = (0..k).map(|_| r.string()).collect::<Result<_>>()?;
        let classifier_params = r.params()?;
        let ae_params = r.params()?;
        if r.take(8)? != BUNDLE_TRAILER {
            return Err(Error::CorruptBundle("bad trailer".into()));
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptBundle(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let bundle = ModelBundle {
            autoencoder: Autoencoder {
                frames,
                channels,
                latent_dim: latent,
                encoder: arch.encoder,
                decoder: arch.decoder,
                params: ae_params,
            },
            classifier: Classifier {
                arch: arch.classifier_arch,
                frames,
                channels,
                net: arch.classifier,
                params: classifier_params,
            },
            normalization: Normalization {
                mean,
                scale,
                degenerate,
                fitted_on,
            },
            schema: MotionSchema {
                joint_names,
                frame_rate,
            },
            manifest,
        };
        bundle.check_schema()?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    bundle.save(path)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    ModelBundle::load(path)
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

fn put_params(w: &mut Vec<u8>, ps: &ParameterSet) {
    put_u32(w, ps.len() as u32);
    for (name, p) in ps.iter() {
        put_str(w, name);
        put_u32(w, p.value.shape().len() as u32);
        for &d in p.value.shape() {
            w.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            w.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptBundle(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::CorruptBundle("invalid UTF-8".into()))
    }

    fn params(&mut self) -> Result<ParameterSet> {
        let count = self.u32()?;
        let mut ps = ParameterSet::new();
        for _ in 0..count {
            let name = self.string()?;
            let ndim = self.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape
                    .push(usize::try_from(self.u64()?).map_err(|_| Error::CorruptBundle("dimension overflow".into()))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n.saturating_mul(8) <= self.buf.len() - self.pos)
                .ok_or_else(|| Error::CorruptBundle(format!("tensor `{name}` exceeds file size")))?;
            let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            ps.insert(name, Tensor::new(shape, data)?);
        }
        Ok(ps)
    }
}
