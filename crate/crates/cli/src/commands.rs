//! Implementations of the CLI subcommands: each loads inputs, runs the
//! corresponding library pipeline and writes CSV/JSON/SVG outputs into the
//! configured output directory.

use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde_json::json;

use eshape::contour::{from_srvf, Contour};
use eshape::ensemble::{Covariate, ShapeEnsemble};
use eshape::error::{Error, Result};
use eshape::inference;
use eshape::io::{self, TableWriter};
use eshape::preshape;
use eshape::registration::{self, DistanceMode};
use eshape::shapestats::{self, SpcaModel};
use eshape::srvf::Srvf;
use eshape::svg;
use eshape::AnalysisConfig;

fn out_dir(config: &AnalysisConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(config.out_dir.clone())
}

fn contour_of(q: &Srvf, id: &str) -> Contour {
    from_srvf(q, Vector2::zeros()).0.with_id(id)
}

pub fn distance(manifest: &Path, mode: DistanceMode, config: &AnalysisConfig) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let matrix = registration::pairwise_distance_matrix(&ensemble, mode, config)?;
    io::write_distance_csv(&dir.join(format!("distance_{mode}.csv")), &matrix, config)?;
    io::write_json(
        &dir.join(format!("distance_{mode}.json")),
        &io::distance_sidecar(&matrix, config),
    )?;
    println!(
        "distance: {} shapes, mode {mode}, max asymmetry {:.3e}",
        matrix.n(),
        matrix.max_asymmetry
    );
    Ok(())
}

fn path_to_json(path: &preshape::GeodesicPath) -> serde_json::Value {
    json!({
        "length": path.length,
        "converged": path.converged,
        "iterations": path.iterations,
        "energy_trace": path.energy_trace,
        "waypoints": path.waypoints.iter().map(|q| {
            q.samples().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    })
}

pub fn geodesic(manifest: &Path, id1: &str, id2: &str, config: &AnalysisConfig) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let find = |id: &str| -> Result<&Srvf> {
        ensemble
            .ids()
            .iter()
            .position(|i| i == id)
            .map(|i| ensemble.shape(i))
            .ok_or_else(|| Error::Manifest(format!("id '{id}' not found in manifest")))
    };
    let q1 = find(id1)?;
    let q2 = find(id2)?;

    // Elastic: register, then trace the geodesic to the registered curve.
    let (d_elastic, reg) = registration::distance_shape(q1, q2, config)?;
    let elastic_path = preshape::geodesic(
        q1,
        &reg.registered_srvf,
        config.waypoints,
        config.geodesic_tol,
        config.geodesic_max_iters,
    )?;
    // Nonelastic: rotation and seed only.
    let d_nonelastic = registration::distance_nonelastic(q1, q2, config)?;
    let ne_reg = registration::nonelastic_registration(q1, q2)?;
    let nonelastic_path = preshape::geodesic(
        q1,
        &ne_reg,
        config.waypoints,
        config.geodesic_tol,
        config.geodesic_max_iters,
    )?;

    let value = json!({
        "metadata": io::metadata(config),
        "id1": id1,
        "id2": id2,
        "elastic": { "distance": d_elastic, "path": path_to_json(&elastic_path) },
        "nonelastic": { "distance": d_nonelastic, "path": path_to_json(&nonelastic_path) },
    });
    io::write_json(&dir.join(format!("geodesic_{id1}_{id2}.json")), &value)?;

    let rows = vec![
        (
            format!("nonelastic d={d_nonelastic:.4}"),
            nonelastic_path
                .waypoints
                .iter()
                .enumerate()
                .map(|(i, q)| contour_of(q, &format!("ne{i}")))
                .collect::<Vec<_>>(),
        ),
        (
            format!("elastic d={d_elastic:.4}"),
            elastic_path
                .waypoints
                .iter()
                .enumerate()
                .map(|(i, q)| contour_of(q, &format!("el{i}")))
                .collect::<Vec<_>>(),
        ),
    ];
    std::fs::write(dir.join(format!("geodesic_{id1}_{id2}.svg")), svg::curve_rows(&rows))?;
    println!("geodesic {id1} -> {id2}: elastic {d_elastic:.4}, nonelastic {d_nonelastic:.4}");
    Ok(())
}

/// Fit mean and sPCA, tolerating singleton ensembles (empty model).
fn fit_model(ensemble: &ShapeEnsemble, config: &AnalysisConfig) -> Result<(shapestats::KarcherMean, SpcaModel)> {
    let km = shapestats::karcher_mean(ensemble, config)?;
    let model = if ensemble.len() >= 2 {
        shapestats::covariance_and_spca(&km.mean, &km.shooting, ensemble.ids())?
    } else {
        SpcaModel {
            mean: km.mean.clone(),
            shooting_vectors: km.shooting.clone(),
            eigenvalues: Vec::new(),
            eigenvectors: Vec::new(),
            coefficients: vec![Vec::new()],
            total_variance: 0.0,
            ids: ensemble.ids().to_vec(),
        }
    };
    Ok((km, model))
}

fn write_model(path: &Path, model: &SpcaModel, config: &AnalysisConfig) -> Result<()> {
    let value = json!({
        "metadata": io::metadata(config),
        "model": io::SpcaModelFile::from_model(model),
    });
    io::write_json(path, &value)
}

fn write_coefficients(path: &Path, model: &SpcaModel, config: &AnalysisConfig) -> Result<()> {
    let r = model.eigenvalues.len();
    let header = if r == 0 {
        "id".to_string()
    } else {
        let cols: Vec<String> = (1..=r).map(|j| format!("PC{j}")).collect();
        format!("id,{}", cols.join(","))
    };
    let rows: Vec<String> = model
        .ids
        .iter()
        .zip(&model.coefficients)
        .map(|(id, coeffs)| {
            if coeffs.is_empty() {
                id.clone()
            } else {
                let vals: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("{id},{}", vals.join(","))
            }
        })
        .collect();
    TableWriter::new(config).write(path, &header, &rows)
}

fn direction_svg(model: &SpcaModel, j: usize) -> Result<String> {
    let ts = [0.0, 2.0, 4.0, 6.0];
    let shapes = shapestats::principal_direction_path(model, j, &ts)?;
    let row: Vec<Contour> = shapes
        .iter()
        .zip(&ts)
        .map(|(q, t)| contour_of(q, &format!("t{t}")))
        .collect();
    let rows = vec![(
        format!("direction {} (t = 0, 2, 4, 6)", j + 1),
        row,
    )];
    Ok(svg::curve_rows(&rows))
}

pub fn mean_pca(manifest: &Path, config: &AnalysisConfig) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let (km, model) = fit_model(&ensemble, config)?;

    write_model(&dir.join("spca_model.json"), &model, config)?;
    write_coefficients(&dir.join("principal_coefficients.csv"), &model, config)?;
    io::write_contour_csv(&dir.join("mean_contour.csv"), &contour_of(&km.mean, "mean"))?;
    for j in 0..model.rank().min(3) {
        std::fs::write(
            dir.join(format!("principal_direction_{}.svg", j + 1)),
            direction_svg(&model, j)?,
        )?;
    }
    if !km.converged {
        return Err(Error::GeodesicNotConverged {
            iterations: km.iterations,
            last_decrease: f64::NAN,
        });
    }
    println!(
        "mean-pca: n={}, rank {}, total variance {:.4}",
        ensemble.len(),
        model.rank(),
        model.total_variance
    );
    Ok(())
}

pub fn cluster(
    manifest: &Path,
    mode: DistanceMode,
    k_override: Option<usize>,
    config: &AnalysisConfig,
) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let k = k_override.unwrap_or(config.k_clusters);
    let matrix = registration::pairwise_distance_matrix(&ensemble, mode, config)?;
    let assignment = inference::hierarchical_cluster(&matrix, k)?;
    let embedding = inference::classical_mds(&matrix, 2)?;

    let writer = TableWriter::new(config);
    let label_rows: Vec<String> = ensemble
        .ids()
        .iter()
        .zip(&assignment.labels)
        .map(|(id, l)| format!("{id},{l}"))
        .collect();
    writer.write(&dir.join("cluster_labels.csv"), "id,cluster", &label_rows)?;

    let coord_rows: Vec<String> = ensemble
        .ids()
        .iter()
        .zip(&embedding.coordinates)
        .map(|(id, c)| format!("{id},{},{}", c[0], c.get(1).copied().unwrap_or(0.0)))
        .collect();
    writer.write(&dir.join("mds_coordinates.csv"), "id,mds1,mds2", &coord_rows)?;
    std::fs::write(
        dir.join("mds.svg"),
        svg::scatter(&embedding.coordinates, &assignment.labels, "MDS of shape distances"),
    )?;

    // Cluster-wise sPCA and survival summaries.
    let mut variance_rows = Vec::new();
    let mut survival_rows = Vec::new();
    for c in 1..=k {
        let members: Vec<usize> = (0..ensemble.len())
            .filter(|&i| assignment.labels[i] == c)
            .collect();
        let sub = ensemble.subset(&members)?;
        let (_km, model) = fit_model(&sub, config)?;
        write_model(
            &dir.join(format!("cluster_{c}_spca_model.json")),
            &model,
            config,
        )?;
        variance_rows.push(format!("{c},{},{}", sub.len(), model.total_variance));

        let survivals: Vec<f64> = members
            .iter()
            .filter_map(|&i| ensemble.covariate(i, "survival").and_then(|v| v.as_number()))
            .collect();
        if !survivals.is_empty() {
            let mean = survivals.iter().sum::<f64>() / survivals.len() as f64;
            let mut sorted = survivals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if sorted.len() % 2 == 1 {
                sorted[sorted.len() / 2]
            } else {
                0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
            };
            survival_rows.push(format!("{c},{},{mean},{median}", survivals.len()));
        }
    }
    writer.write(
        &dir.join("cluster_variances.csv"),
        "cluster,n,cumulative_variance",
        &variance_rows,
    )?;
    if !survival_rows.is_empty() {
        writer.write(
            &dir.join("cluster_survival_summary.csv"),
            "cluster,n,mean_survival,median_survival",
            &survival_rows,
        )?;
    }
    io::write_json(
        &dir.join("cluster_summary.json"),
        &json!({
            "metadata": io::metadata(config),
            "k": k,
            "mode": mode.to_string(),
            "labels": assignment.labels,
            "ids": ensemble.ids(),
            "merge_heights": assignment.merge_heights,
            "mds_negativity": embedding.negativity,
        }),
    )?;
    println!("cluster: {} shapes into {k} clusters", ensemble.len());
    Ok(())
}

pub fn permtest(
    manifest: &Path,
    covariate: &str,
    cutoffs: &[f64],
    config: &AnalysisConfig,
) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::Manifest("no cutoffs given".into()));
    }
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let values: Vec<f64> = (0..ensemble.len())
        .map(|i| {
            ensemble
                .covariate(i, covariate)
                .and_then(|v| v.as_number())
                .ok_or_else(|| {
                    Error::Manifest(format!(
                        "shape '{}' lacks numeric covariate '{covariate}'",
                        ensemble.id(i)
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &cutoff in cutoffs {
        let labels: Vec<bool> = values.iter().map(|&v| v > cutoff).collect();
        let n1 = labels.iter().filter(|&&l| l).count();
        let n2 = labels.len() - n1;
        let r = inference::permutation_test_mean_shape(
            &ensemble,
            &labels,
            config.permutations,
            config.rng_seed,
            config,
        )?;
        rows.push(format!(
            "{cutoff},{n1},{n2},{},{}",
            r.observed_statistic, r.p_value
        ));
        results.push(json!({
            "cutoff": cutoff,
            "n_above": n1,
            "n_below": n2,
            "observed_statistic": r.observed_statistic,
            "p_value": r.p_value,
            "b": r.b,
            "permutation_statistics": r.permutation_statistics,
        }));
    }
    TableWriter::new(config).write(
        &dir.join("permutation_tests.csv"),
        "cutoff,n_above,n_below,observed_d,p_value",
        &rows,
    )?;
    io::write_json(
        &dir.join("permutation_tests.json"),
        &json!({
            "metadata": io::metadata(config),
            "covariate": covariate,
            "tests": results,
        }),
    )?;
    println!("permtest: {} cutoffs on '{covariate}'", cutoffs.len());
    Ok(())
}

/// Binary-code covariates for enrichment: numeric values must be 0/1; text
/// covariates expand one-vs-rest per distinct value.
fn binary_covariates(ensemble: &ShapeEnsemble) -> Vec<(String, Vec<Option<u8>>)> {
    let n = ensemble.len();
    let mut out = Vec::new();
    for name in ensemble.covariate_names() {
        let values: Vec<Option<&Covariate>> =
            (0..n).map(|i| ensemble.covariate(i, &name)).collect();
        let has_text = values.iter().flatten().any(|v| v.as_text().is_some());
        if has_text {
            let mut levels: Vec<String> = values
                .iter()
                .flatten()
                .filter_map(|v| v.as_text().map(str::to_string))
                .collect();
            levels.sort();
            levels.dedup();
            for level in levels {
                let coded: Vec<Option<u8>> = values
                    .iter()
                    .map(|v| v.map(|v| u8::from(v.as_text() == Some(level.as_str()))))
                    .collect();
                out.push((format!("{name}={level}"), coded));
            }
        } else {
            let coded: Vec<Option<u8>> = values
                .iter()
                .map(|v| {
                    v.and_then(|v| v.as_number()).map(|x| {
                        if x == 0.0 {
                            0u8
                        } else if x == 1.0 {
                            1u8
                        } else {
                            2u8 // flagged non-binary downstream
                        }
                    })
                })
                .collect();
            out.push((name.clone(), coded));
        }
    }
    out
}

pub fn enrich(manifest: &Path, labels_path: &Path, config: &AnalysisConfig) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;

    // Cluster labels CSV: id,cluster.
    let text = std::fs::read_to_string(labels_path)
        .map_err(|e| Error::Manifest(format!("cannot read '{}': {e}", labels_path.display())))?;
    let mut labels = vec![0usize; ensemble.len()];
    let mut seen = vec![false; ensemble.len()];
    for line in text.lines().skip_while(|l| l.starts_with('#')).skip(1) {
        let mut parts = line.split(',');
        let (Some(id), Some(label)) = (parts.next(), parts.next()) else {
            continue;
        };
        if let Some(i) = ensemble.ids().iter().position(|x| x == id) {
            labels[i] = label
                .trim()
                .parse()
                .map_err(|e| Error::Manifest(format!("bad cluster label for '{id}': {e}")))?;
            seen[i] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        let missing: Vec<&str> = ensemble
            .ids()
            .iter()
            .zip(&seen)
            .filter(|(_, &s)| !s)
            .map(|(id, _)| id.as_str())
            .collect();
        return Err(Error::Manifest(format!(
            "labels file lacks entries for: {}",
            missing.join(", ")
        )));
    }
    let assignment = inference::ClusterAssignment {
        labels,
        linkage: "complete".into(),
        k: 2,
        merge_heights: Vec::new(),
    };

    let covariates = binary_covariates(&ensemble);
    let (rows, skipped) =
        inference::enrichment_screen(&assignment, &covariates, config.draws, config.rng_seed)?;
    for name in &skipped {
        eprintln!("warning: covariate '{name}' is not 0/1-codable, skipped");
    }

    let table_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            let flag = if r.enriched_in_cluster1 {
                "cluster1"
            } else if r.enriched_in_cluster2 {
                "cluster2"
            } else {
                "none"
            };
            format!(
                "{},{},{},{},{},{},{flag}",
                r.covariate, r.result.y1, r.result.n1, r.result.y2, r.result.n2,
                r.result.probability
            )
        })
        .collect();
    TableWriter::new(config).write(
        &dir.join("enrichment.csv"),
        "covariate,y1,n1,y2,n2,probability,enriched_in",
        &table_rows,
    )?;
    io::write_json(
        &dir.join("enrichment.json"),
        &json!({
            "metadata": io::metadata(config),
            "rows": rows,
            "skipped": skipped,
        }),
    )?;
    let names: Vec<String> = rows.iter().map(|r| r.covariate.clone()).collect();
    let probs: Vec<f64> = rows.iter().map(|r| r.result.probability).collect();
    std::fs::write(
        dir.join("enrichment.svg"),
        svg::enrichment_lines(&names, &probs, "Cluster enrichment probabilities"),
    )?;
    println!("enrich: {} covariates ({} skipped)", rows.len(), skipped.len());
    Ok(())
}

pub fn simulate(model_path: &Path, count: usize, config: &AnalysisConfig) -> Result<()> {
    let model = io::read_spca_model(model_path)?;
    if count == 0 {
        println!("simulate: count 0, nothing to write");
        return Ok(());
    }
    let dir = out_dir(config)?;
    let kappa = model.rank();
    let mut files = Vec::new();
    for i in 0..count {
        let q = shapestats::random_shape(&model, config.rng_seed.wrapping_add(i as u64), kappa)?;
        let name = format!("sim_{i:03}.csv");
        io::write_contour_csv(&dir.join(&name), &contour_of(&q, &format!("sim{i}")))?;
        files.push(name);
    }
    io::write_json(
        &dir.join("simulate_meta.json"),
        &json!({
            "metadata": io::metadata(config),
            "model": model_path.display().to_string(),
            "count": count,
            "kappa": kappa,
            "files": files,
        }),
    )?;
    println!("simulate: wrote {count} contours");
    Ok(())
}

pub fn loo(manifest: &Path, config: &AnalysisConfig) -> Result<()> {
    let dir = out_dir(config)?;
    let ensemble = io::load_ensemble(manifest, config)?;
    let (report, pairs) = shapestats::loo_reconstruction_detailed(&ensemble, config)?;

    io::write_json(
        &dir.join("loo_report.json"),
        &json!({
            "metadata": io::metadata(config),
            "mean": report.mean,
            "std": report.std,
            "median": report.median,
            "median_absolute_deviation": report.median_absolute_deviation,
            "max_possible_error": shapestats::MAX_RECONSTRUCTION_ERROR,
            "per_shape": ensemble.ids().iter().zip(&report.per_shape_error)
                .map(|(id, e)| json!({"id": id, "error": e})).collect::<Vec<_>>(),
        }),
    )?;
    let rows: Vec<String> = ensemble
        .ids()
        .iter()
        .zip(&report.per_shape_error)
        .map(|(id, e)| format!("{id},{e}"))
        .collect();
    TableWriter::new(config).write(&dir.join("loo_errors.csv"), "id,error", &rows)?;

    // Overlays for the smallest, median and largest reconstruction error.
    let mut order: Vec<usize> = (0..ensemble.len()).collect();
    order.sort_by(|&a, &b| {
        report.per_shape_error[a]
            .partial_cmp(&report.per_shape_error[b])
            .unwrap()
    });
    let picks = [
        ("loo_min.svg", order[0]),
        ("loo_median.svg", order[order.len() / 2]),
        ("loo_max.svg", order[order.len() - 1]),
    ];
    for (file, i) in picks {
        let truth = contour_of(&pairs[i].true_shape, "true");
        let recon = contour_of(&pairs[i].reconstructed, "reconstruction");
        let title = format!(
            "{} (E = {:.4})",
            ensemble.id(i),
            report.per_shape_error[i]
        );
        std::fs::write(
            dir.join(file),
            svg::curve_overlay(&[(&truth, "#1f4e8c"), (&recon, "#c23b22")], &title),
        )?;
    }
    println!(
        "loo: n={}, median error {:.4} ({:.2}% of max)",
        ensemble.len(),
        report.median,
        100.0 * report.median / shapestats::MAX_RECONSTRUCTION_ERROR
    );
    Ok(())
}
