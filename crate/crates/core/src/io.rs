//! Model and checkpoint files.
//!
//! A model is stored either as canonical JSON or as a little-endian binary
//! container; both hold the same fields in the same order (format tag and
//! version, space config, link labels, vocabulary, then `dim_bias`, the
//! per-label link matrices row-major, per-predicate weights and biases in id
//! order) and both reproduce every `f64` bit for bit.
//!
//! A training checkpoint is a model file plus a `.state` sidecar with the
//! optimiser state, fantasy particles, latent state and batch counters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{LabelTable, Link, LinkLabel, PredicateId, Vocabulary};
use crate::error::{Error, Result};
use crate::mcmc::LatentState;
use crate::model::{Model, Params, Situation};
use crate::space::{EntityVector, SpaceConfig};
use crate::trainer::{Hyperparams, TrainState};

pub const MODEL_FORMAT: &str = "fds-model";
pub const MODEL_VERSION: u32 = 1;
const MODEL_MAGIC: &[u8; 4] = b"FDSM";
const STATE_MAGIC: &[u8; 4] = b"FDSS";
const STATE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelEncoding {
    Json,
    Binary,
}

impl ModelEncoding {
    /// `.json` means JSON, anything else binary.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ModelEncoding::Json,
            _ => ModelEncoding::Binary,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    format: String,
    version: u32,
    config: SpaceConfig,
    labels: Vec<String>,
    vocabulary: Vec<(String, u64)>,
    dim_bias: Vec<f64>,
    link_weights: Vec<Vec<f64>>,
    pred_weights: Vec<Vec<f64>>,
    pred_bias: Vec<f64>,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let n = model.n_dims();
    let p = &model.params;
    let doc = ModelJson {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        config: model.config,
        labels: model.labels.names().to_vec(),
        vocabulary: model.vocab.entries().to_vec(),
        dim_bias: p.dim_bias.clone(),
        link_weights: p.link_weights.chunks(n * n).map(<[f64]>::to_vec).collect(),
        pred_weights: p.pred_weights.chunks(n).map(<[f64]>::to_vec).collect(),
        pred_bias: p.pred_bias.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let doc: ModelJson = serde_json::from_str(text)?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::Format(format!("unexpected format tag `{}`", doc.format)));
    }
    if doc.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported version {}", doc.version)));
    }
    let labels = LabelTable::from_names(doc.labels)?;
    let vocab = Vocabulary::from_ordered(doc.vocabulary)?;
    let n = doc.config.n_dims;
    if doc.link_weights.iter().any(|m| m.len() != n * n) || doc.pred_weights.iter().any(|r| r.len() != n) {
        return Err(Error::Format("parameter row length does not match n_dims".into()));
    }
    let params = Params {
        n_dims: n,
        n_labels: doc.link_weights.len(),
        n_preds: doc.pred_weights.len(),
        link_weights: doc.link_weights.concat(),
        dim_bias: doc.dim_bias,
        pred_weights: doc.pred_weights.concat(),
        pred_bias: doc.pred_bias,
    };
    Model::new(doc.config, labels, vocab, params)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LE>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 string".into()))
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    w.write_u64::<LE>(v.len() as u64)?;
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, expect: usize) -> Result<Vec<f64>> {
    let len = r.read_u64::<LE>()? as usize;
    if len != expect {
        return Err(Error::Format(format!("array of length {len}, expected {expect}")));
    }
    let mut v = vec![0.0; len];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

fn write_params<W: Write>(w: &mut W, p: &Params) -> Result<()> {
    for a in p.arrays() {
        write_f64s(w, a)?;
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut R, n_dims: usize, n_labels: usize, n_preds: usize) -> Result<Params> {
    let dim_bias = read_f64s(r, n_dims)?;
    let link_weights = read_f64s(r, n_labels * n_dims * n_dims)?;
    let pred_weights = read_f64s(r, n_preds * n_dims)?;
    let pred_bias = read_f64s(r, n_preds)?;
    Ok(Params {
        n_dims,
        n_labels,
        n_preds,
        link_weights,
        dim_bias,
        pred_weights,
        pred_bias,
    })
}

pub fn write_model_binary<W: Write>(w: &mut W, model: &Model) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LE>(MODEL_VERSION)?;
    w.write_u64::<LE>(model.config.n_dims as u64)?;
    w.write_u64::<LE>(model.config.cardinality as u64)?;
    w.write_u32::<LE>(model.labels.len() as u32)?;
    for l in model.labels.names() {
        write_str(w, l)?;
    }
    w.write_u64::<LE>(model.vocab.len() as u64)?;
    for (name, count) in model.vocab.entries() {
        write_str(w, name)?;
        w.write_u64::<LE>(*count)?;
    }
    write_params(w, &model.params)
}

pub fn read_model_binary<R: Read>(r: &mut R) -> Result<Model> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a binary model file".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_dims = r.read_u64::<LE>()? as usize;
    let cardinality = r.read_u64::<LE>()? as usize;
    let config = SpaceConfig::new(n_dims, cardinality).map_err(|e| Error::Format(e.to_string()))?;
    let n_labels = r.read_u32::<LE>()? as usize;
    let labels = LabelTable::from_names((0..n_labels).map(|_| read_str(r)).collect::<Result<_>>()?)?;
    let n_preds = r.read_u64::<LE>()? as usize;
    let mut entries = Vec::with_capacity(n_preds.min(1 << 24));
    for _ in 0..n_preds {
        let name = read_str(r)?;
        entries.push((name, r.read_u64::<LE>()?));
    }
    let vocab = Vocabulary::from_ordered(entries)?;
    let params = read_params(r, n_dims, n_labels, n_preds)?;
    Model::new(config, labels, vocab, params)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    match ModelEncoding::for_path(path) {
        ModelEncoding::Json => w.write_all(model_to_json(model)?.as_bytes())?,
        ModelEncoding::Binary => write_model_binary(&mut w, model)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load either encoding; the binary magic decides.
pub fn load_model(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MODEL_MAGIC) {
        read_model_binary(&mut bytes.as_slice())
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Format("model file is neither binary nor UTF-8".into()))?;
        model_from_json(&text)
    }
}

fn write_entity<W: Write>(w: &mut W, x: &EntityVector) -> Result<()> {
    w.write_u32::<LE>(x.cardinality() as u32)?;
    for &d in x.active() {
        w.write_u32::<LE>(d)?;
    }
    Ok(())
}

fn read_entity<R: Read>(r: &mut R, config: &SpaceConfig) -> Result<EntityVector> {
    let c = r.read_u32::<LE>()? as usize;
    if c != config.cardinality {
        return Err(Error::Format("entity cardinality mismatch".into()));
    }
    let mut active = vec![0u32; c];
    r.read_u32_into::<LE>(&mut active)?;
    EntityVector::from_active(active, config).map_err(|e| Error::Format(e.to_string()))
}

fn encode_latents(latents: &[LatentState]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.write_u64::<LE>(latents.len() as u64)?;
    for l in latents {
        buf.write_u32::<LE>(l.entities.len() as u32)?;
        for x in &l.entities {
            write_entity(&mut buf, x)?;
        }
        for c in &l.neg_predicates {
            buf.write_u32::<LE>(c.0)?;
        }
    }
    Ok(buf)
}

fn decode_latents(mut r: &[u8], config: &SpaceConfig, n_preds: usize) -> Result<Vec<LatentState>> {
    let n = r.read_u64::<LE>()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let k = r.read_u32::<LE>()? as usize;
        let entities = (0..k).map(|_| read_entity(&mut r, config)).collect::<Result<_>>()?;
        let mut neg_predicates = Vec::with_capacity(k);
        for _ in 0..k {
            let c = r.read_u32::<LE>()?;
            if c as usize >= n_preds {
                return Err(Error::Format("latent predicate out of range".into()));
            }
            neg_predicates.push(PredicateId(c));
        }
        out.push(LatentState {
            entities,
            neg_predicates,
        });
    }
    if !r.is_empty() {
        return Err(Error::Format("trailing bytes in latent state".into()));
    }
    Ok(out)
}

/// Hex SHA-256 of the encoded latent state.
pub fn latent_digest(latents: &[LatentState]) -> Result<String> {
    let bytes = encode_latents(latents)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Path of the state sidecar for a checkpoint model path.
pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".state");
    PathBuf::from(s)
}

pub fn write_state_sidecar<W: Write>(w: &mut W, state: &TrainState, hp: &Hyperparams) -> Result<()> {
    w.write_all(STATE_MAGIC)?;
    w.write_u32::<LE>(STATE_VERSION)?;
    write_str(w, &serde_json::to_string(hp)?)?;
    w.write_u64::<LE>(state.epoch)?;
    w.write_u64::<LE>(state.batch)?;
    write_params(w, &state.adagrad)?;
    w.write_u64::<LE>(state.particles.len() as u64)?;
    for p in &state.particles {
        w.write_u32::<LE>(p.entities.len() as u32)?;
        w.write_u32::<LE>(p.links.len() as u32)?;
        for l in &p.links {
            w.write_u32::<LE>(l.src as u32)?;
            w.write_u16::<LE>(l.label.0)?;
            w.write_u32::<LE>(l.tgt as u32)?;
        }
        for x in &p.entities {
            write_entity(w, x)?;
        }
    }
    let latents = encode_latents(&state.latents)?;
    let digest = Sha256::digest(&latents);
    w.write_u64::<LE>(latents.len() as u64)?;
    w.write_all(&latents)?;
    w.write_all(&digest)?;
    Ok(())
}

/// Read a sidecar against an already-loaded model.
pub fn read_state_sidecar<R: Read>(r: &mut R, model: Model) -> Result<(TrainState, Hyperparams)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(Error::Format("not a checkpoint state file".into()));
    }
    if r.read_u32::<LE>()? != STATE_VERSION {
        return Err(Error::Format("unsupported checkpoint version".into()));
    }
    let hp: Hyperparams = serde_json::from_str(&read_str(r)?)?;
    let epoch = r.read_u64::<LE>()?;
    let batch = r.read_u64::<LE>()?;
    let p = &model.params;
    let adagrad = read_params(r, p.n_dims, p.n_labels, p.n_preds)?;
    let n_particles = r.read_u64::<LE>()? as usize;
    let mut particles = Vec::with_capacity(n_particles.min(1 << 20));
    for _ in 0..n_particles {
        let k = r.read_u32::<LE>()? as usize;
        let n_links = r.read_u32::<LE>()? as usize;
        let mut links = Vec::with_capacity(n_links);
        for _ in 0..n_links {
            let src = r.read_u32::<LE>()? as usize;
            let label = LinkLabel(r.read_u16::<LE>()?);
            let tgt = r.read_u32::<LE>()? as usize;
            links.push(Link::new(src, label, tgt));
        }
        crate::corpus::validate_links(k, &links, model.labels.len())?;
        let entities = (0..k).map(|_| read_entity(r, &model.config)).collect::<Result<_>>()?;
        particles.push(Situation { entities, links });
    }
    let len = r.read_u64::<LE>()? as usize;
    let mut latent_bytes = vec![0u8; len];
    r.read_exact(&mut latent_bytes)?;
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    if Sha256::digest(&latent_bytes).as_slice() != digest {
        return Err(Error::Format("latent state digest mismatch".into()));
    }
    let latents = decode_latents(&latent_bytes, &model.config, model.n_preds())?;
    Ok((
        TrainState {
            model,
            adagrad,
            particles,
            latents,
            epoch,
            batch,
        },
        hp,
    ))
}

/// Write `path` (model, encoding by extension) and `path.state`.
pub fn save_checkpoint(path: &Path, state: &TrainState, hp: &Hyperparams) -> Result<()> {
    save_model(&state.model, path)?;
    let side = sidecar_path(path);
    let f = File::create(&side).map_err(|e| Error::io(&side, e))?;
    let mut w = BufWriter::new(f);
    write_state_sidecar(&mut w, state, hp)?;
    w.flush().map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(TrainState, Hyperparams)> {
    let model = load_model(path)?;
    let side = sidecar_path(path);
    let f = File::open(&side).map_err(|e| Error::io(&side, e))?;
    read_state_sidecar(&mut BufReader::new(f), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::trainer::init_random;

    fn model() -> Model {
        let vocab = Vocabulary::from_counts(vec![("dog".into(), 4), ("cat".into(), 2)]).unwrap();
        let mut m = init_random(SpaceConfig::new(5, 2).unwrap(), LabelTable::default(), vocab, &mut seeded(4)).unwrap();
        m.params.dim_bias[2] = -0.0;
        m.params.dim_bias[3] = 1e-300;
        m
    }

    fn bits(p: &Params) -> Vec<u64> {
        p.iter().map(f64::to_bits).collect()
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = model();
        let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
        assert_eq!(bits(&back.params), bits(&m.params));
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.labels, m.labels);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model_binary(&mut buf, &m).unwrap();
        let back = read_model_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(bits(&back.params), bits(&m.params));
        assert_eq!(back.config, m.config);
    }

    #[test]
    fn negative_link_weight_in_file_is_rejected() {
        let m = model();
        let text = model_to_json(&m).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["link_weights"][0][0] = serde_json::json!(-1.0);
        assert!(model_from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let m = model();
        let mut buf = Vec::new();
        write_model_binary(&mut buf, &m).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_model_binary(&mut buf.as_slice()).is_err());
    }
}
