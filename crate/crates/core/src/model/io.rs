//! Binary model files: a text header of `key=value` lines, then each tensor
//! as `tensor <name> <rows> <cols>` followed by little-endian f64 data.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Architecture, Model, ModelConfig, ModelParams};
use crate::data::Embeddings;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const MAGIC: &str = "HYPERDEF1";

pub fn write_model_to<W: Write>(mut out: W, model: &Model) -> Result<()> {
    let p = model.params();
    let c = &p.config;
    let mut header = format!("{MAGIC}\n");
    for (k, v) in [
        ("dim", c.dim.to_string()),
        ("architecture", c.architecture.to_string()),
        ("mask", c.mask.to_string()),
        ("share_weights", c.share_weights.to_string()),
        ("max_definition_len", c.max_definition_len.to_string()),
        ("learning_rate", c.learning_rate.to_string()),
        ("epsilon", c.epsilon.to_string()),
        ("seed", c.seed.to_string()),
        ("threshold", p.threshold.to_string()),
        ("embeddings", model.embeddings().fingerprint()),
    ] {
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push_str("end_header\n");
    let fmt_err = |e: std::io::Error| Error::Format(format!("writing model: {e}"));
    out.write_all(header.as_bytes()).map_err(fmt_err)?;
    for (name, m) in p.tensors() {
        out.write_all(format!("tensor {name} {} {}\n", m.rows(), m.cols()).as_bytes())
            .map_err(fmt_err)?;
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&bytes).map_err(fmt_err)?;
    }
    out.flush().map_err(fmt_err)
}

/// Writes via a sibling temporary file so a failure leaves nothing behind.
pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let result = fs::File::create(&tmp)
        .map_err(|e| Error::io(&tmp, e))
        .and_then(|f| write_model_to(std::io::BufWriter::new(f), model))
        .and_then(|()| fs::rename(&tmp, path).map_err(|e| Error::io(path, e)));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| Error::Format(format!("reading model: {e}")))?;
    if n == 0 {
        return Err(Error::Format("unexpected end of model file".into()));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn field<'a>(h: &'a HashMap<String, String>, key: &str) -> Result<&'a str> {
    h.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("model header is missing {key:?}")))
}

fn parse_field<T: std::str::FromStr>(h: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = field(h, key)?;
    raw.parse()
        .map_err(|_| Error::Format(format!("bad value {raw:?} for {key:?} in model header")))
}

/// Reads a model and binds it to `embeddings`, which must have the
/// fingerprint recorded at training time.
pub fn read_model_from<R: Read>(input: R, embeddings: Arc<Embeddings>) -> Result<Model> {
    let mut r = BufReader::new(input);
    let magic = read_line(&mut r)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("not a model file (magic {magic:?})")));
    }
    let mut header = HashMap::new();
    loop {
        let line = read_line(&mut r)?;
        if line == "end_header" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let expected = field(&header, "embeddings")?;
    let actual = embeddings.fingerprint();
    if expected != actual {
        return Err(Error::Fingerprint {
            expected: expected.to_string(),
            actual,
        });
    }
    let config = ModelConfig {
        dim: parse_field(&header, "dim")?,
        architecture: field(&header, "architecture")?.parse::<Architecture>()?,
        mask: field(&header, "mask")?.parse()?,
        share_weights: parse_field(&header, "share_weights")?,
        max_definition_len: parse_field(&header, "max_definition_len")?,
        learning_rate: parse_field(&header, "learning_rate")?,
        epsilon: parse_field(&header, "epsilon")?,
        seed: parse_field(&header, "seed")?,
    };
    let threshold: f64 = parse_field(&header, "threshold")?;
    let mut params = ModelParams::init(config)?;
    params.threshold = threshold;
    let names: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    let mut values = Vec::with_capacity(names.len());
    for (name, shape) in names {
        let line = read_line(&mut r)?;
        let parts: Vec<&str> = line.split(' ').collect();
        let dims = match parts.as_slice() {
            ["tensor", n, rows, cols] if *n == name => rows.parse::<usize>().ok().zip(cols.parse::<usize>().ok()),
            _ => None,
        };
        if dims != Some(shape) {
            return Err(Error::Format(format!(
                "expected tensor {name} {}x{}, found {line:?}",
                shape.0, shape.1
            )));
        }
        let mut bytes = vec![0u8; shape.0 * shape.1 * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("truncated data for tensor {name}")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let m = Matrix::from_vec(shape.0, shape.1, data)?;
        if !m.is_finite() {
            return Err(Error::Format(format!("tensor {name} has non-finite entries")));
        }
        values.push(m);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)
        .map_err(|e| Error::Format(format!("reading model: {e}")))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after last tensor", rest.len())));
    }
    Model::new(params.with_tensors(&values)?, embeddings)
}

pub fn read_model(path: &Path, embeddings: Arc<Embeddings>) -> Result<Model> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model_from(f, embeddings)
}
