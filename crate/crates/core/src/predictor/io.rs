//! Model files: a JSON manifest next to a little-endian `f32` payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::hyper::PredictorHyper;
use crate::predictor::model::Model;
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format_version: u32,
    pub hyper: PredictorHyper,
    pub seed: u64,
    pub dtype: String,
    /// Payload file name, relative to the manifest.
    pub payload: String,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub config: serde_json::Value,
}

fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("f32")
}

/// Writes `manifest_path` and its payload (same stem, `.f32` extension).
pub fn save_model<T: Real>(model: &Model<T>, manifest_path: &Path, config: serde_json::Value) -> Result<()> {
    let payload = payload_path(manifest_path);
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        hyper: model.hyper.clone(),
        seed: model.hyper.seed,
        dtype: "f32le".into(),
        payload: payload
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        tensors: Model::<T>::shapes(&model.hyper)
            .into_iter()
            .map(|(name, shape)| TensorEntry {
                name: name.into(),
                shape,
            })
            .collect(),
        config,
    };
    let bytes: Vec<u8> = model
        .flatten()
        .into_iter()
        .flat_map(|v| (v.as_f64() as f32).to_le_bytes())
        .collect();
    fs::write(&payload, bytes)?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a model, rejecting unknown versions and shape mismatches.
pub fn load_model<T: Real>(manifest_path: &Path) -> Result<Model<T>> {
    let raw: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest_path)?)
        .map_err(|e| Error::Manifest(format!("not JSON: {e}")))?;
    // check the version before the layout so old files get a useful message
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Manifest(format!("format version {v} (expected {FORMAT_VERSION})")));
        }
        None => return Err(Error::Manifest("format_version missing".into())),
    }
    let manifest: ModelManifest =
        serde_json::from_value(raw).map_err(|e| Error::Manifest(format!("layout: {e}")))?;
    if manifest.dtype != "f32le" {
        return Err(Error::Manifest(format!("dtype {}", manifest.dtype)));
    }
    manifest.hyper.validate()?;
    let expected = Model::<T>::shapes(&manifest.hyper);
    if expected.len() != manifest.tensors.len()
        || expected
            .iter()
            .zip(&manifest.tensors)
            .any(|((n, s), e)| *n != e.name || *s != e.shape)
    {
        return Err(Error::ShapeMismatch("manifest tensors do not match the hyperparameters".into()));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&manifest.payload))?;
    let mut model = Model::<T>::zeros(&manifest.hyper);
    if bytes.len() != 4 * model.num_params() {
        return Err(Error::ShapeMismatch(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            4 * model.num_params()
        )));
    }
    let flat: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Manifest("payload contains non-finite values".into()));
    }
    model.set_flat(&flat)?;
    Ok(model)
}
