//! Artifact output: every pipeline writes its results through an
//! [`ArtifactSet`], which records a SHA-256 digest per file and finishes by
//! writing `manifest.json`. Identical configurations therefore produce
//! byte-identical artifact trees, and the manifest makes that checkable.

use anyhow::{Context, Result};
use gridz::ss::ContinuousStateSpace;
use gridz::sysid::{ArxModel, SubspaceModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Run manifest: the config digest, the seeds that fed the experiment, and a
/// digest of every artifact written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seeds: ManifestSeeds,
    pub artifacts: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ManifestSeeds {
    pub excitation_d: u64,
    pub excitation_q: u64,
    pub noise: u64,
}

/// Collects files under one output directory and finishes with a manifest.
pub struct ArtifactSet {
    dir: PathBuf,
    config_sha256: String,
    seeds: ManifestSeeds,
    entries: Vec<ManifestEntry>,
}

impl ArtifactSet {
    /// Creates the output directory (and parents) if needed.
    pub fn create(dir: &Path, config_sha256: String, seeds: ManifestSeeds) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), config_sha256, seeds, entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes one artifact and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.entries.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    /// Runs a library writer against a target path, then digests the file it
    /// produced.
    pub fn write_with<F>(&mut self, name: &str, writer: F) -> Result<PathBuf>
    where
        F: FnOnce(&Path) -> gridz::Result<()>,
    {
        let path = self.dir.join(name);
        writer(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let bytes =
            std::fs::read(&path).with_context(|| format!("cannot re-read {}", path.display()))?;
        self.entries.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(&bytes) });
        Ok(path)
    }

    /// Writes `manifest.json` (artifact list sorted by path) and returns the
    /// manifest.
    pub fn finish(mut self) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            config_sha256: self.config_sha256.clone(),
            seeds: self.seeds,
            artifacts: self.entries.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).context("manifest serialization")?;
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}

/// Row-major nested-list form of a matrix, for JSON artifacts.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        anyhow::bail!("{what}: ragged matrix rows");
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// JSON form of a state-space realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceJson {
    pub order: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

impl StateSpaceJson {
    pub fn from_continuous(ss: &ContinuousStateSpace) -> Self {
        Self {
            order: ss.n_states(),
            a: matrix_rows(&ss.a),
            b: matrix_rows(&ss.b),
            c: matrix_rows(&ss.c),
            d: matrix_rows(&ss.d),
        }
    }

    pub fn to_continuous(&self) -> Result<ContinuousStateSpace> {
        ContinuousStateSpace::new(
            matrix_from_rows(&self.a, "a")?,
            matrix_from_rows(&self.b, "b")?,
            matrix_from_rows(&self.c, "c")?,
            matrix_from_rows(&self.d, "d")?,
        )
        .map_err(|e| anyhow::anyhow!("invalid state-space matrices: {e}"))
    }
}

/// Where a stored model came from, for traceability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub config_sha256: String,
    pub seed_d: u64,
    pub seed_q: u64,
    pub noise_seed: u64,
}

/// On-disk form of an identified model: the native parameterization plus the
/// continuous-time realization used for frequency-domain evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    /// `"arx"` or `"subspace"`.
    pub kind: String,
    /// Measurement sample interval, seconds.
    pub sample_interval_s: f64,
    /// ARX only: output-lag matrices, one row-major block per lag.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_coeffs: Option<Vec<Vec<Vec<f64>>>>,
    /// ARX only: input-lag matrices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_coeffs: Option<Vec<Vec<Vec<f64>>>>,
    /// ARX only: one-step residual covariance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_covariance: Option<Vec<Vec<f64>>>,
    /// Subspace only: singular values of the projected data matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<Vec<f64>>,
    /// Subspace only: weak singular-value gap at the requested order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_gap_warning: Option<bool>,
    /// Subspace only: estimated `A` had spectral radius above one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unstable: Option<bool>,
    /// Continuous-time model after order reduction and sampling inversion.
    pub continuous_model: StateSpaceJson,
    /// Conversion route actually used (the exact logarithm route falls back
    /// to bilinear when the discrete spectrum touches the negative real
    /// axis).
    pub d2c_method_used: String,
    pub provenance: ModelProvenance,
}

impl ModelJson {
    pub fn from_arx(
        arx: &ArxModel,
        continuous: &ContinuousStateSpace,
        d2c_method_used: &str,
        provenance: ModelProvenance,
    ) -> Self {
        Self {
            kind: "arx".to_string(),
            sample_interval_s: arx.dt,
            a_coeffs: Some(arx.a_coeffs.iter().map(matrix_rows).collect()),
            b_coeffs: Some(arx.b_coeffs.iter().map(matrix_rows).collect()),
            residual_covariance: Some(matrix_rows(&arx.residual_covariance)),
            singular_values: None,
            order_gap_warning: None,
            unstable: None,
            continuous_model: StateSpaceJson::from_continuous(continuous),
            d2c_method_used: d2c_method_used.to_string(),
            provenance,
        }
    }

    pub fn from_subspace(
        model: &SubspaceModel,
        continuous: &ContinuousStateSpace,
        d2c_method_used: &str,
        provenance: ModelProvenance,
    ) -> Self {
        Self {
            kind: "subspace".to_string(),
            sample_interval_s: model.ss.dt,
            a_coeffs: None,
            b_coeffs: None,
            residual_covariance: None,
            singular_values: Some(model.singular_values.clone()),
            order_gap_warning: Some(model.order_gap_warning),
            unstable: Some(model.unstable),
            continuous_model: StateSpaceJson::from_continuous(continuous),
            d2c_method_used: d2c_method_used.to_string(),
            provenance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).context("model serialization")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read model {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("cannot parse model {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn digest_matches_known_vector() {
        // SHA-256 of the empty string and of "abc" are published test vectors.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn matrix_rows_round_trip() {
        let m = dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0];
        let rows = matrix_rows(&m);
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let back = matrix_from_rows(&rows, "m").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn state_space_json_round_trip() {
        let ss = ContinuousStateSpace::new(
            dmatrix![-1.0, 0.5; 0.0, -2.0],
            dmatrix![1.0; 0.0],
            dmatrix![1.0, 1.0],
            dmatrix![0.0],
        )
        .unwrap();
        let json = StateSpaceJson::from_continuous(&ss);
        let back = json.to_continuous().unwrap();
        assert_eq!(back.a, ss.a);
        assert_eq!(back.b, ss.b);
        assert_eq!(back.c, ss.c);
        assert_eq!(back.d, ss.d);
    }

    #[test]
    fn artifact_set_writes_sorted_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let seeds = ManifestSeeds { excitation_d: 1, excitation_q: 2, noise: 3 };
        let mut set = ArtifactSet::create(dir.path(), "cfg".to_string(), seeds).unwrap();
        set.write("zz.csv", b"z").unwrap();
        set.write("aa.csv", b"a").unwrap();
        let manifest = set.finish().unwrap();
        assert_eq!(manifest.artifacts[0].path, "aa.csv");
        assert_eq!(manifest.artifacts[1].path, "zz.csv");
        assert_eq!(manifest.artifacts[0].sha256, sha256_hex(b"a"));
        let on_disk: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(on_disk.config_sha256, "cfg");
        assert_eq!(on_disk.artifacts.len(), 2);
    }
}
