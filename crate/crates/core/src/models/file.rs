//! Binary model container:
//!
//! ```text
//! magic      8 bytes  "CHRLMDL\0"
//! hlen       u32 LE   length of the JSON header
//! header     hlen bytes of UTF-8 JSON
//! payload    f64 LE parameters, voice by voice, then the marginals
//! checksum   32 bytes SHA-256 of everything above
//! ```
//!
//! The header carries `format_version`, `encoding`, `delta_t`, `vocab_hash`,
//! `kind`, per-voice `shapes` and the vocabularies themselves.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::classifier::{MaxEnt, Mlp, ModelKind, VoiceModel};
use super::set::ModelSet;
use super::ModelError;
use crate::score::{Encoding, Vocabularies};

pub const MAGIC: &[u8; 8] = b"CHRLMDL\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n: usize,
    pub m: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub encoding: Encoding,
    pub delta_t: usize,
    pub vocab_hash: String,
    pub kind: ModelKind,
    pub shapes: [Shape; 4],
    pub vocabularies: Vocabularies,
}

impl ModelSet {
    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            format_version: FORMAT_VERSION,
            encoding: self.encoding(),
            delta_t: self.delta_t,
            vocab_hash: self.vocabs.hash(),
            kind: self.kind,
            shapes: self.voices.each_ref().map(|v| Shape {
                n: v.n(),
                m: v.m(),
                hidden: v.hidden(),
            }),
            vocabularies: self.vocabs.clone(),
        }
    }

    pub fn save(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.voices {
            for p in v.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        for m in &self.marginals {
            for p in m {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn load(bytes: &[u8]) -> Result<ModelSet, ModelError> {
        let corrupt = |m: &str| ModelError::CorruptModel(m.to_owned());
        if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("not a model file"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        let hlen = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
        let header_end = 12usize.checked_add(hlen).filter(|e| *e <= body.len()).ok_or_else(|| corrupt("truncated header"))?;
        // version first, so a newer file is reported as such even if its
        // header layout changed
        let raw: serde_json::Value =
            serde_json::from_slice(&body[12..header_end]).map_err(|e| ModelError::CorruptModel(format!("header: {e}")))?;
        let version = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| corrupt("header has no format_version"))?;
        if version != FORMAT_VERSION as u64 {
            return Err(ModelError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if Sha256::digest(body).as_slice() != checksum {
            return Err(corrupt("checksum mismatch"));
        }
        let header: ModelHeader = serde_json::from_value(raw).map_err(|e| ModelError::CorruptModel(format!("header: {e}")))?;
        if header.vocabularies.hash() != header.vocab_hash {
            return Err(corrupt("vocabulary hash mismatch"));
        }
        if header.vocabularies.encoding != header.encoding {
            return Err(corrupt("vocabulary encoding differs from header"));
        }
        let layout = super::features::FeatureLayout::new(header.delta_t, header.vocabularies.sizes());
        let payload = &body[header_end..];
        if payload.len() % 8 != 0 {
            return Err(corrupt("payload is not a whole number of f64"));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |k: usize| -> Result<Vec<f64>, ModelError> {
            let v: Vec<f64> = values.by_ref().take(k).collect();
            if v.len() == k {
                Ok(v)
            } else {
                Err(corrupt("truncated payload"))
            }
        };
        let mut voices = Vec::with_capacity(4);
        for (v, s) in header.shapes.iter().enumerate() {
            if s.n != layout.sizes[v] || s.m != layout.dim(v) {
                return Err(corrupt("shape does not match vocabularies and delta_t"));
            }
            let model = match header.kind {
                ModelKind::MaxEnt => VoiceModel::MaxEnt(MaxEnt::from_params(s.n, s.m, take(s.n * s.m + s.n)?)?),
                ModelKind::Mlp => VoiceModel::Mlp(Mlp::from_params(s.n, s.m, s.hidden, take(Mlp::param_count(s.n, s.m, s.hidden))?)?),
            };
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(corrupt("non-finite parameter"));
            }
            voices.push(model);
        }
        let mut marginals = Vec::with_capacity(4);
        for s in &header.shapes {
            marginals.push(take(s.n)?);
        }
        if values.next().is_some() {
            return Err(corrupt("trailing payload"));
        }
        Ok(ModelSet {
            kind: header.kind,
            delta_t: header.delta_t,
            vocabs: header.vocabularies,
            voices: voices.try_into().expect("four voices"),
            marginals: marginals.try_into().expect("four voices"),
        })
    }

    /// Loads and refuses a model whose encoding differs from `expected`.
    pub fn load_for(bytes: &[u8], expected: Encoding) -> Result<ModelSet, ModelError> {
        let m = Self::load(bytes)?;
        if m.encoding() != expected {
            return Err(ModelError::EncodingMismatch {
                model: m.encoding(),
                input: expected,
            });
        }
        Ok(m)
    }
}
