//! File formats: contour CSV, ensemble manifest JSON and table/JSON writers.
//!
//! A contour file is a CSV with header `x,y` and one point per row. An
//! ensemble manifest is a JSON array of `{ "id", "path", "covariates"? }`
//! entries; paths are resolved relative to the manifest's directory.
//!
//! Every emitted CSV begins with a `# config_digest=<hex>` comment so the
//! table is traceable to the exact configuration; JSON outputs carry the
//! digest (and the only timestamp) in a `metadata` object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::AnalysisConfig;
use crate::contour::{validate_and_normalize, Contour};
use crate::ensemble::{Covariate, ShapeEnsemble};
use crate::error::{Error, Result};
use crate::registration::DistanceMatrix;

/// One manifest entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    #[serde(default)]
    pub covariates: BTreeMap<String, Covariate>,
}

/// Read a contour CSV (header `x,y`).
pub fn read_contour_csv(path: &Path, id: &str) -> Result<Contour> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Manifest(format!("cannot open '{}': {e}", path.display())))?;
    let mut points = Vec::new();
    for record in reader.deserialize::<(f64, f64)>() {
        let (x, y) = record?;
        points.push(Vector2::new(x, y));
    }
    validate_and_normalize(&points, id)
}

/// Write a contour CSV (header `x,y`).
pub fn write_contour_csv(path: &Path, contour: &Contour) -> Result<()> {
    let mut out = String::from("x,y\n");
    for p in contour.points() {
        out.push_str(&format!("{},{}\n", p.x, p.y));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a manifest file into entries (paths resolved against its parent).
pub fn read_manifest(path: &Path) -> Result<Vec<(ManifestEntry, PathBuf)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Manifest(format!("cannot read '{}': {e}", path.display())))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("invalid manifest '{}': {e}", path.display())))?;
    if entries.is_empty() {
        return Err(Error::Manifest("manifest lists no shapes".into()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(entries
        .into_iter()
        .map(|e| {
            let resolved = base.join(&e.path);
            (e, resolved)
        })
        .collect())
}

/// Load a manifest into a shape ensemble: read, validate, resample to
/// `config.m` and convert every contour to its SRVF.
pub fn load_ensemble(manifest_path: &Path, config: &AnalysisConfig) -> Result<ShapeEnsemble> {
    let entries = read_manifest(manifest_path)?;
    let mut shapes = Vec::with_capacity(entries.len());
    let mut covariates = Vec::with_capacity(entries.len());
    for (entry, path) in entries {
        let contour =
            read_contour_csv(&path, &entry.id).map_err(|e| e.for_shape(&entry.id))?;
        let q = crate::contour::to_srvf(&contour, config.m).map_err(|e| e.for_shape(&entry.id))?;
        shapes.push((entry.id, q));
        covariates.push(entry.covariates);
    }
    ShapeEnsemble::with_covariates(shapes, covariates)
}

/// CSV writer that stamps the config digest as a leading comment line.
pub struct TableWriter {
    digest: String,
}

impl TableWriter {
    pub fn new(config: &AnalysisConfig) -> Self {
        TableWriter {
            digest: config.digest(),
        }
    }

    pub fn write(&self, path: &Path, header: &str, rows: &[String]) -> Result<()> {
        let mut out = format!("# config_digest={}\n{header}\n", self.digest);
        for row in rows {
            out.push_str(row);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Standard metadata object for JSON outputs. `generated_at` (unix seconds)
/// is the only field allowed to differ between identical re-runs.
pub fn metadata(config: &AnalysisConfig) -> serde_json::Value {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "config_digest": config.digest(),
        "m": config.m,
        "rng_seed": config.rng_seed,
        "generated_at": now,
    })
}

/// Write pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Distance matrix CSV: header row and column of shape ids.
pub fn write_distance_csv(
    path: &Path,
    matrix: &DistanceMatrix,
    config: &AnalysisConfig,
) -> Result<()> {
    let n = matrix.n();
    let header = format!("id,{}", matrix.ids.join(","));
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let vals: Vec<String> = (0..n).map(|j| matrix.get(i, j).to_string()).collect();
            format!("{},{}", matrix.ids[i], vals.join(","))
        })
        .collect();
    TableWriter::new(config).write(path, &header, &rows)
}

/// Distance matrix JSON sidecar with mode and asymmetry diagnostics.
pub fn distance_sidecar(matrix: &DistanceMatrix, config: &AnalysisConfig) -> serde_json::Value {
    json!({
        "metadata": metadata(config),
        "mode": matrix.mode.to_string(),
        "m": config.m,
        "seed_stride": config.effective_seed_stride(config.m),
        "n": matrix.n(),
        "ids": matrix.ids,
        "max_asymmetry": matrix.max_asymmetry,
    })
}

/// Flat file form of an sPCA model (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpcaModelFile {
    pub n: usize,
    pub m: usize,
    pub ids: Vec<String>,
    pub mean_samples: Vec<[f64; 2]>,
    pub mean_scale: f64,
    pub eigenvalues: Vec<f64>,
    /// One tangent field per eigenvalue, m points each.
    pub eigenvectors: Vec<Vec<[f64; 2]>>,
    /// Row per shape, column per retained direction.
    pub coefficients: Vec<Vec<f64>>,
    pub total_variance: f64,
}

impl SpcaModelFile {
    pub fn from_model(model: &crate::shapestats::SpcaModel) -> Self {
        let to_pairs =
            |s: &[Vector2<f64>]| -> Vec<[f64; 2]> { s.iter().map(|p| [p.x, p.y]).collect() };
        SpcaModelFile {
            n: model.n(),
            m: model.mean.m(),
            ids: model.ids.clone(),
            mean_samples: to_pairs(model.mean.samples()),
            mean_scale: model.mean.scale(),
            eigenvalues: model.eigenvalues.clone(),
            eigenvectors: model
                .eigenvectors
                .iter()
                .map(|u| to_pairs(u.samples()))
                .collect(),
            coefficients: model.coefficients.clone(),
            total_variance: model.total_variance,
        }
    }

    pub fn into_model(self) -> crate::shapestats::SpcaModel {
        let from_pairs = |s: Vec<[f64; 2]>| -> Vec<Vector2<f64>> {
            s.into_iter().map(|[x, y]| Vector2::new(x, y)).collect()
        };
        let mean = crate::srvf::Srvf::from_samples_unchecked(
            from_pairs(self.mean_samples),
            self.mean_scale,
        );
        let eigenvectors = self
            .eigenvectors
            .into_iter()
            .map(|u| crate::preshape::TangentVector::from_samples(from_pairs(u)))
            .collect();
        crate::shapestats::SpcaModel {
            mean,
            shooting_vectors: Vec::new(),
            eigenvalues: self.eigenvalues,
            eigenvectors,
            coefficients: self.coefficients,
            total_variance: self.total_variance,
            ids: self.ids,
        }
    }
}

/// Read an sPCA model JSON written by the mean-pca command.
pub fn read_spca_model(path: &Path) -> Result<crate::shapestats::SpcaModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Manifest(format!("cannot read model '{}': {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let file: SpcaModelFile = serde_json::from_value(
        value
            .get("model")
            .cloned()
            .ok_or_else(|| Error::Manifest("model JSON lacks a 'model' object".into()))?,
    )?;
    Ok(file.into_model())
}

/// Read a distance matrix CSV back (used by tests and downstream tools).
pub fn read_distance_csv(path: &Path) -> Result<DistanceMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidDistanceMatrix("empty file".into()))?;
    let ids: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let n = ids.len();
    let mut values = vec![0.0; n * n];
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        fields.next();
        for (j, f) in fields.enumerate() {
            values[i * n + j] = f
                .parse::<f64>()
                .map_err(|e| Error::InvalidDistanceMatrix(e.to_string()))?;
        }
    }
    Ok(DistanceMatrix {
        ids,
        values,
        mode: crate::registration::DistanceMode::Elastic,
        max_asymmetry: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn contour_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = synthetic::fourier_loop(1, 4, 0.15, 100);
        write_contour_csv(&path, &c).unwrap();
        let back = read_contour_csv(&path, "c").unwrap();
        assert_eq!(back.len(), c.len());
        for (a, b) in c.points().iter().zip(back.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn manifest_loads_an_ensemble_with_covariates() {
        let dir = tempfile::tempdir().unwrap();
        for (i, survival) in [12.0, 30.5].iter().enumerate() {
            let c = synthetic::fourier_loop(i as u64, 4, 0.15, 200);
            write_contour_csv(&dir.path().join(format!("s{i}.csv")), &c).unwrap();
            let _ = survival;
        }
        let manifest = serde_json::json!([
            {"id": "a", "path": "s0.csv", "covariates": {"survival": 12.0, "subtype": "classical"}},
            {"id": "b", "path": "s1.csv", "covariates": {"survival": 30.5, "subtype": "neural"}},
        ]);
        let mpath = dir.path().join("manifest.json");
        std::fs::write(&mpath, manifest.to_string()).unwrap();
        let cfg = AnalysisConfig {
            m: 64,
            ..AnalysisConfig::default()
        };
        let e = load_ensemble(&mpath, &cfg).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.m(), 64);
        assert_eq!(
            e.covariate(0, "survival"),
            Some(&Covariate::Number(12.0))
        );
        assert_eq!(
            e.covariate(1, "subtype"),
            Some(&Covariate::Text("neural".into()))
        );
    }

    #[test]
    fn missing_file_error_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = serde_json::json!([{"id": "ghost", "path": "nope.csv"}]);
        let mpath = dir.path().join("manifest.json");
        std::fs::write(&mpath, manifest.to_string()).unwrap();
        let cfg = AnalysisConfig::default();
        let err = load_ensemble(&mpath, &cfg).unwrap_err();
        assert!(err.to_string().contains("ghost"), "error: {err}");
    }

    #[test]
    fn distance_csv_round_trips() {
        let cfg = AnalysisConfig::default();
        let matrix = DistanceMatrix {
            ids: vec!["a".into(), "b".into()],
            values: vec![0.0, 0.25, 0.25, 0.0],
            mode: crate::registration::DistanceMode::Elastic,
            max_asymmetry: 1e-4,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_distance_csv(&path, &matrix, &cfg).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# config_digest={}", cfg.digest())));
        let back = read_distance_csv(&path).unwrap();
        assert_eq!(back.ids, matrix.ids);
        assert_eq!(back.values, matrix.values);
    }
}
