//! Model persistence and content hashing.
//!
//! Every model is stored in one self-describing container:
//!
//! ```text
//! MSOBS1-MODEL <manifest_len>\n      ASCII header
//! <manifest>                         manifest_len bytes of JSON
//! <payload>                          payload_len bytes of matrix blocks
//! ```
//!
//! The manifest is a flat JSON object carrying the model kind, scalar
//! hyperparameters, `payload_len`, and `payload_hash` (SHA-256 of the
//! payload bytes). The payload concatenates the model's matrices in a fixed
//! per-kind order, each in the binary block format of the matrix files
//! (`MSOBS1 <rows> <cols>\n` + row-major little-endian f64). Vectors are
//! stored as single-column matrices. A pipeline container nests the
//! containers of its parts as its own payload, in a fixed order.
//!
//! Both layers are deterministic byte-for-byte, so saving the same model
//! twice produces identical files, and every load verifies the payload hash
//! before trusting the content.
//!
//! Hashes cover the raw little-endian f64 bytes of a matrix in row-major
//! order, prefixed by its dimensions, so two models agree on their training
//! data exactly when the hashes match.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::gappy_pod::{ObservationMask, PODBasis};
use crate::harmonics::{GHModel, InputSpace};
use crate::io;
use crate::kernel::KernelConfig;
use crate::scalar::{real, Real};
use crate::workflows::{ParamScaling, Pipeline};

/// Header magic of a model container.
pub const MODEL_MAGIC: &str = "MSOBS1-MODEL";

fn hex(digest: &[u8]) -> String {
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// SHA-256 of arbitrary bytes, as lowercase hex.
pub fn bytes_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// SHA-256 of a matrix's dimensions and row-major little-endian f64 payload,
/// as lowercase hex.
pub fn matrix_hash<T: Real>(m: &DMatrix<T>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    hasher.update((m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)].to_f64().unwrap_or(f64::NAN);
            hasher.update(v.to_le_bytes());
        }
    }
    hex(&hasher.finalize())
}

// ---------------------------------------------------------------------------
// Container envelope
// ---------------------------------------------------------------------------

fn write_container<W: Write, M: Serialize>(
    w: &mut W,
    manifest: &M,
    payload: &[u8],
    path: &str,
) -> Result<()> {
    let manifest_bytes = serde_json::to_vec(manifest)
        .map_err(|e| Error::format(path, format!("manifest serialization failed: {e}")))?;
    write!(w, "{MODEL_MAGIC} {}\n", manifest_bytes.len())
        .and_then(|_| w.write_all(&manifest_bytes))
        .and_then(|_| w.write_all(payload))
        .map_err(|e| Error::io(path, e))
}

/// Reads one container envelope: returns the parsed manifest value and the
/// verified payload bytes. The reader is left positioned right after the
/// payload, so containers compose sequentially.
fn read_container<R: BufRead>(r: &mut R, path: &str) -> Result<(serde_json::Value, Vec<u8>)> {
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)
        .map_err(|e| Error::io(path, e))?;
    let header_str = std::str::from_utf8(&header)
        .map_err(|_| Error::format(path, "container header is not ASCII"))?;
    let header_str = header_str
        .strip_suffix('\n')
        .ok_or_else(|| Error::format(path, "container header line unterminated"))?;
    let rest = header_str.strip_prefix(MODEL_MAGIC).ok_or_else(|| {
        Error::format(path, format!("missing container magic '{MODEL_MAGIC}'"))
    })?;
    let manifest_len: usize = rest
        .trim()
        .parse()
        .map_err(|_| Error::format(path, "manifest length is not a number"))?;
    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(path, "manifest shorter than the header promises")
        } else {
            Error::io(path, e)
        }
    })?;
    let manifest: serde_json::Value = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::format(path, format!("manifest is not valid JSON: {e}")))?;
    let payload_len = manifest
        .get("payload_len")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::format(path, "manifest lacks payload_len"))? as usize;
    let payload_hash = manifest
        .get("payload_hash")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::format(path, "manifest lacks payload_hash"))?
        .to_string();
    let mut payload = vec![0u8; payload_len];
    r.read_exact(&mut payload).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(path, "payload shorter than the manifest promises")
        } else {
            Error::io(path, e)
        }
    })?;
    if bytes_hash(&payload) != payload_hash {
        return Err(Error::format(
            path,
            "payload hash mismatch; the file is corrupted or was edited",
        ));
    }
    Ok((manifest, payload))
}

fn manifest_kind<'a>(manifest: &'a serde_json::Value, path: &str) -> Result<&'a str> {
    manifest
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::format(path, "manifest lacks a model kind"))
}

fn expect_kind(manifest: &serde_json::Value, want: &str, path: &str) -> Result<()> {
    let got = manifest_kind(manifest, path)?;
    if got != want {
        return Err(Error::format(
            path,
            format!("expected a {want} container, found {got}"),
        ));
    }
    Ok(())
}

fn typed_manifest<M: for<'de> Deserialize<'de>>(
    manifest: serde_json::Value,
    path: &str,
) -> Result<M> {
    serde_json::from_value(manifest)
        .map_err(|e| Error::format(path, format!("manifest fields malformed: {e}")))
}

fn append_block<T: Real>(buf: &mut Vec<u8>, m: &DMatrix<T>) {
    io::write_matrix_block(buf, m).expect("writing to a Vec cannot fail");
}

fn append_vector_block<T: Real>(buf: &mut Vec<u8>, v: &DVector<T>) {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    append_block(buf, &m);
}

struct PayloadReader<'a> {
    cursor: &'a [u8],
    path: &'a str,
}

impl<'a> PayloadReader<'a> {
    fn new(payload: &'a [u8], path: &'a str) -> Self {
        PayloadReader {
            cursor: payload,
            path,
        }
    }

    fn matrix<T: Real>(&mut self) -> Result<DMatrix<T>> {
        io::read_matrix_block(&mut self.cursor, self.path)
    }

    fn vector<T: Real>(&mut self) -> Result<DVector<T>> {
        let m = self.matrix::<T>()?;
        if m.ncols() != 1 {
            return Err(Error::format(
                self.path,
                format!("expected a single-column block, found {} columns", m.ncols()),
            ));
        }
        Ok(DVector::from_column_slice(m.as_slice()))
    }

    fn finish(self) -> Result<()> {
        if !self.cursor.is_empty() {
            return Err(Error::format(
                self.path,
                format!("{} unexpected bytes after the last block", self.cursor.len()),
            ));
        }
        Ok(())
    }
}

fn save_to_file<F: FnOnce(&mut BufWriter<File>) -> Result<()>>(path: &Path, f: F) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn load_from_file<T, F: FnOnce(&mut BufReader<File>, &str) -> Result<T>>(
    path: &Path,
    f: F,
) -> Result<T> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(name.clone(), e))?;
    let mut r = BufReader::new(file);
    let out = f(&mut r, &name)?;
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(out),
        Ok(_) => Err(Error::format(name, "trailing bytes after the container")),
        Err(e) => Err(Error::io(name, e)),
    }
}

// ---------------------------------------------------------------------------
// Diffusion map model
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DMapManifest {
    kind: String,
    payload_len: u64,
    payload_hash: String,
    epsilon: f64,
    density_normalize: bool,
    n_pairs: usize,
    selected: Vec<usize>,
    training_hash: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_hash: Option<String>,
}

fn write_dmap<T: Real, W: Write>(w: &mut W, model: &DMapModel<T>, path: &str) -> Result<()> {
    write_dmap_tagged(w, model, path, None)
}

fn write_dmap_tagged<T: Real, W: Write>(
    w: &mut W,
    model: &DMapModel<T>,
    path: &str,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut payload = Vec::new();
    append_block(&mut payload, &model.training);
    append_vector_block(&mut payload, &model.eigenvalues);
    append_block(&mut payload, &model.eigenvectors);
    append_vector_block(&mut payload, &model.row_density);
    let manifest = DMapManifest {
        kind: "dmap".into(),
        payload_len: payload.len() as u64,
        payload_hash: bytes_hash(&payload),
        epsilon: model.kernel_config.epsilon.to_f64().expect("finite bandwidth"),
        density_normalize: model.kernel_config.density_normalize,
        n_pairs: model.n_pairs(),
        selected: model.selected.clone(),
        training_hash: model.training_hash.clone(),
        config_hash: config_hash.map(str::to_string),
    };
    write_container(w, &manifest, &payload, path)
}

fn read_dmap<T: Real, R: BufRead>(r: &mut R, path: &str) -> Result<DMapModel<T>> {
    let (manifest, payload) = read_container(r, path)?;
    expect_kind(&manifest, "dmap", path)?;
    let manifest: DMapManifest = typed_manifest(manifest, path)?;
    let mut blocks = PayloadReader::new(&payload, path);
    let training: DMatrix<T> = blocks.matrix()?;
    let eigenvalues: DVector<T> = blocks.vector()?;
    let eigenvectors: DMatrix<T> = blocks.matrix()?;
    let row_density: DVector<T> = blocks.vector()?;
    blocks.finish()?;
    if matrix_hash(&training) != manifest.training_hash {
        return Err(Error::format(
            path,
            "training data does not match its recorded hash",
        ));
    }
    if eigenvalues.len() != manifest.n_pairs {
        return Err(Error::format(
            path,
            "eigenpair count disagrees with the manifest",
        ));
    }
    let mut config = KernelConfig::new(real::<T>(manifest.epsilon))?;
    if !manifest.density_normalize {
        config = config.without_density_normalization();
    }
    DMapModel::from_parts(
        config,
        training,
        eigenvalues,
        eigenvectors,
        row_density,
        manifest.selected,
        manifest.training_hash,
    )
}

pub fn save_dmap_model<T: Real>(path: &Path, model: &DMapModel<T>) -> Result<()> {
    save_dmap_model_tagged(path, model, None)
}

/// `save_dmap_model` with an optional run-configuration hash recorded in the
/// manifest, so an artifact can be traced back to the exact settings that
/// produced it.
pub fn save_dmap_model_tagged<T: Real>(
    path: &Path,
    model: &DMapModel<T>,
    config_hash: Option<&str>,
) -> Result<()> {
    save_to_file(path, |w| {
        write_dmap_tagged(w, model, &path.display().to_string(), config_hash)
    })
}

pub fn load_dmap_model<T: Real>(path: &Path) -> Result<DMapModel<T>> {
    load_from_file(path, |r, name| read_dmap(r, name))
}

// ---------------------------------------------------------------------------
// Geometric Harmonics model
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GhManifest {
    kind: String,
    payload_len: u64,
    payload_hash: String,
    input_space: String,
    bandwidth: f64,
    delta: f64,
    retained: usize,
    underfit: bool,
    input_hash: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_hash: Option<String>,
}

fn write_gh<T: Real, W: Write>(w: &mut W, model: &GHModel<T>, path: &str) -> Result<()> {
    write_gh_tagged(w, model, path, None)
}

fn write_gh_tagged<T: Real, W: Write>(
    w: &mut W,
    model: &GHModel<T>,
    path: &str,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut payload = Vec::new();
    append_block(&mut payload, &model.input_points);
    append_vector_block(&mut payload, &model.sigma);
    append_block(&mut payload, &model.psi);
    append_block(&mut payload, &model.coefficients);
    let manifest = GhManifest {
        kind: "gh".into(),
        payload_len: payload.len() as u64,
        payload_hash: bytes_hash(&payload),
        input_space: match model.input_space {
            InputSpace::Ambient => "ambient".into(),
            InputSpace::Latent => "latent".into(),
        },
        bandwidth: model.bandwidth.to_f64().expect("finite bandwidth"),
        delta: model.delta.to_f64().expect("finite delta"),
        retained: model.retained(),
        underfit: model.underfit,
        input_hash: model.input_hash.clone(),
        config_hash: config_hash.map(str::to_string),
    };
    write_container(w, &manifest, &payload, path)
}

fn read_gh<T: Real, R: BufRead>(r: &mut R, path: &str) -> Result<GHModel<T>> {
    let (manifest, payload) = read_container(r, path)?;
    expect_kind(&manifest, "gh", path)?;
    let manifest: GhManifest = typed_manifest(manifest, path)?;
    let mut blocks = PayloadReader::new(&payload, path);
    let input_points: DMatrix<T> = blocks.matrix()?;
    let sigma: DVector<T> = blocks.vector()?;
    let psi: DMatrix<T> = blocks.matrix()?;
    let coefficients: DMatrix<T> = blocks.matrix()?;
    blocks.finish()?;
    if matrix_hash(&input_points) != manifest.input_hash {
        return Err(Error::format(
            path,
            "input points do not match their recorded hash",
        ));
    }
    if sigma.len() != manifest.retained {
        return Err(Error::format(
            path,
            "retained mode count disagrees with the manifest",
        ));
    }
    let input_space = match manifest.input_space.as_str() {
        "ambient" => InputSpace::Ambient,
        "latent" => InputSpace::Latent,
        other => {
            return Err(Error::format(
                path,
                format!("unknown input space '{other}'"),
            ))
        }
    };
    GHModel::from_parts(
        input_space,
        input_points,
        real::<T>(manifest.bandwidth),
        real::<T>(manifest.delta),
        sigma,
        psi,
        coefficients,
        manifest.input_hash,
    )
}

pub fn save_gh_model<T: Real>(path: &Path, model: &GHModel<T>) -> Result<()> {
    save_gh_model_tagged(path, model, None)
}

pub fn save_gh_model_tagged<T: Real>(
    path: &Path,
    model: &GHModel<T>,
    config_hash: Option<&str>,
) -> Result<()> {
    save_to_file(path, |w| {
        write_gh_tagged(w, model, &path.display().to_string(), config_hash)
    })
}

pub fn load_gh_model<T: Real>(path: &Path) -> Result<GHModel<T>> {
    load_from_file(path, |r, name| read_gh(r, name))
}

// ---------------------------------------------------------------------------
// POD basis
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PodManifest {
    kind: String,
    payload_len: u64,
    payload_hash: String,
    rank: usize,
    energy_captured: f64,
    squared_energy: bool,
    has_mean: bool,
    has_scale: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_hash: Option<String>,
}

fn write_pod<T: Real, W: Write>(
    w: &mut W,
    basis: &PODBasis<T>,
    path: &str,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut payload = Vec::new();
    append_block(&mut payload, &basis.u);
    append_vector_block(&mut payload, &basis.singular_values);
    if let Some(mean) = &basis.mean {
        append_vector_block(&mut payload, mean);
    }
    if let Some(scale) = &basis.scale {
        append_vector_block(&mut payload, scale);
    }
    let manifest = PodManifest {
        kind: "pod".into(),
        payload_len: payload.len() as u64,
        payload_hash: bytes_hash(&payload),
        rank: basis.rank,
        energy_captured: basis.energy_captured.to_f64().expect("finite energy"),
        squared_energy: basis.squared_energy,
        has_mean: basis.mean.is_some(),
        has_scale: basis.scale.is_some(),
        config_hash: config_hash.map(str::to_string),
    };
    write_container(w, &manifest, &payload, path)
}

fn read_pod<T: Real, R: BufRead>(r: &mut R, path: &str) -> Result<PODBasis<T>> {
    let (manifest, payload) = read_container(r, path)?;
    expect_kind(&manifest, "pod", path)?;
    let manifest: PodManifest = typed_manifest(manifest, path)?;
    let mut blocks = PayloadReader::new(&payload, path);
    let u: DMatrix<T> = blocks.matrix()?;
    let singular_values: DVector<T> = blocks.vector()?;
    let mean = if manifest.has_mean {
        Some(blocks.vector()?)
    } else {
        None
    };
    let scale = if manifest.has_scale {
        Some(blocks.vector()?)
    } else {
        None
    };
    blocks.finish()?;
    if u.ncols() != manifest.rank {
        return Err(Error::format(path, "rank disagrees with the manifest"));
    }
    PODBasis::from_parts(
        u,
        singular_values,
        real::<T>(manifest.energy_captured),
        mean,
        scale,
        manifest.squared_energy,
    )
}

pub fn save_pod_basis<T: Real>(path: &Path, basis: &PODBasis<T>) -> Result<()> {
    save_pod_basis_tagged(path, basis, None)
}

pub fn save_pod_basis_tagged<T: Real>(
    path: &Path,
    basis: &PODBasis<T>,
    config_hash: Option<&str>,
) -> Result<()> {
    save_to_file(path, |w| {
        write_pod(w, basis, &path.display().to_string(), config_hash)
    })
}

pub fn load_pod_basis<T: Real>(path: &Path) -> Result<PODBasis<T>> {
    load_from_file(path, |r, name| read_pod(r, name))
}

// ---------------------------------------------------------------------------
// Pipeline bundle
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PipelineManifest {
    kind: String,
    payload_len: u64,
    payload_hash: String,
    snapshot_hash: String,
    params_hash: Option<String>,
    has_forward: bool,
    has_params_gh: bool,
    has_partial: bool,
    partial_mask: Option<Vec<usize>>,
    partial_mask_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    param_shift: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    param_spread: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_hash: Option<String>,
}

pub fn save_pipeline<T: Real>(path: &Path, pipeline: &Pipeline<T>) -> Result<()> {
    save_pipeline_tagged(path, pipeline, None)
}

pub fn save_pipeline_tagged<T: Real>(
    path: &Path,
    pipeline: &Pipeline<T>,
    config_hash: Option<&str>,
) -> Result<()> {
    let name = path.display().to_string();
    save_to_file(path, |w| {
        let mut payload = Vec::new();
        write_dmap(&mut payload, &pipeline.dmap, &name)?;
        if let Some(gh) = &pipeline.forward_gh {
            write_gh(&mut payload, gh, &name)?;
        }
        write_gh(&mut payload, &pipeline.inverse_gh, &name)?;
        if let Some(gh) = &pipeline.params_gh {
            write_gh(&mut payload, gh, &name)?;
        }
        if let Some(gh) = &pipeline.partial_gh {
            write_gh(&mut payload, gh, &name)?;
        }
        let manifest = PipelineManifest {
            kind: "pipeline".into(),
            payload_len: payload.len() as u64,
            payload_hash: bytes_hash(&payload),
            snapshot_hash: pipeline.snapshot_hash.clone(),
            params_hash: pipeline.params_hash.clone(),
            has_forward: pipeline.forward_gh.is_some(),
            has_params_gh: pipeline.params_gh.is_some(),
            has_partial: pipeline.partial_gh.is_some(),
            partial_mask: pipeline.partial_mask.as_ref().map(|m| m.indices().to_vec()),
            partial_mask_dim: pipeline.partial_mask.as_ref().map(|m| m.dim()),
            param_shift: pipeline
                .param_scaling
                .as_ref()
                .map(|s| s.shift.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()),
            param_spread: pipeline
                .param_scaling
                .as_ref()
                .map(|s| s.spread.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()),
            config_hash: config_hash.map(str::to_string),
        };
        write_container(w, &manifest, &payload, &name)
    })
}

/// What a container file claims to be, without reconstructing the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerInfo {
    /// Model kind: `dmap`, `gh`, `pod`, or `pipeline`.
    pub kind: String,
    /// Run-configuration hash recorded at save time, when one was.
    pub config_hash: Option<String>,
}

/// Reads and verifies one container envelope, returning its kind and the
/// recorded configuration hash.
pub fn inspect(path: &Path) -> Result<ContainerInfo> {
    load_from_file(path, |r, name| {
        let (manifest, _payload) = read_container(r, name)?;
        let kind = manifest_kind(&manifest, name)?.to_string();
        let config_hash = manifest
            .get("config_hash")
            .and_then(|v| v.as_str())
            .map(str::to_string);
        Ok(ContainerInfo { kind, config_hash })
    })
}

pub fn load_pipeline<T: Real>(path: &Path) -> Result<Pipeline<T>> {
    load_from_file(path, |r, name| {
        let (manifest, payload) = read_container(r, name)?;
        expect_kind(&manifest, "pipeline", name)?;
        let manifest: PipelineManifest = typed_manifest(manifest, name)?;
        let mut cursor: &[u8] = &payload;
        let dmap: DMapModel<T> = read_dmap(&mut cursor, name)?;
        let forward_gh = if manifest.has_forward {
            Some(read_gh(&mut cursor, name)?)
        } else {
            None
        };
        let inverse_gh: GHModel<T> = read_gh(&mut cursor, name)?;
        let params_gh = if manifest.has_params_gh {
            Some(read_gh(&mut cursor, name)?)
        } else {
            None
        };
        let partial_gh = if manifest.has_partial {
            Some(read_gh(&mut cursor, name)?)
        } else {
            None
        };
        if !cursor.is_empty() {
            return Err(Error::format(
                name,
                "unexpected bytes after the last nested container",
            ));
        }
        let partial_mask = match (manifest.partial_mask, manifest.partial_mask_dim) {
            (Some(indices), Some(dim)) => Some(ObservationMask::new(indices, dim)?),
            (None, None) => None,
            _ => {
                return Err(Error::format(
                    name,
                    "partial mask indices and dimension must appear together",
                ))
            }
        };
        let param_scaling = match (manifest.param_shift, manifest.param_spread) {
            (Some(shift), Some(spread)) => {
                if shift.len() != spread.len() {
                    return Err(Error::format(
                        name,
                        "parameter scaling shift and spread lengths disagree",
                    ));
                }
                Some(ParamScaling {
                    shift: DVector::from_iterator(shift.len(), shift.iter().map(|&v| real::<T>(v))),
                    spread: DVector::from_iterator(
                        spread.len(),
                        spread.iter().map(|&v| real::<T>(v)),
                    ),
                })
            }
            (None, None) => None,
            _ => {
                return Err(Error::format(
                    name,
                    "parameter scaling shift and spread must appear together",
                ))
            }
        };
        if dmap.training_hash != manifest.snapshot_hash {
            return Err(Error::format(
                name,
                "nested diffusion map disagrees with the bundle's snapshot hash",
            ));
        }
        let mut pipeline = Pipeline::assemble(
            dmap,
            forward_gh,
            inverse_gh,
            params_gh,
            partial_gh,
            partial_mask,
            param_scaling,
            None,
        )?;
        if pipeline.params_hash.is_none() && pipeline.forward_gh.is_some() {
            // The raw-table hash is not recoverable through the rescaling;
            // the manifest carries it.
            pipeline.params_hash = manifest.params_hash.clone();
        } else if pipeline.params_hash != manifest.params_hash {
            return Err(Error::format(
                name,
                "parameter table hash disagrees with the bundle manifest",
            ));
        }
        Ok(pipeline)
    })
}
