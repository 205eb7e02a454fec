//! Distance-based statistical inference on shape ensembles: complete-linkage
//! hierarchical clustering, classical multidimensional scaling, a permutation
//! two-sample test on Karcher means, and Bayesian cluster enrichment.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::config::AnalysisConfig;
use crate::ensemble::ShapeEnsemble;
use crate::error::{Error, Result};
use crate::preshape::{self, TangentVector};
use crate::registration::{self, DistanceMatrix};
use crate::shapestats;
use crate::srvf::Srvf;

/// Flat cluster assignment cut from a complete-linkage dendrogram.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClusterAssignment {
    /// Cluster label per shape, in 1..=k; clusters are numbered by their
    /// smallest member index.
    pub labels: Vec<usize>,
    pub linkage: String,
    pub k: usize,
    /// Heights of all n-1 merges, in merge order (non-decreasing for
    /// complete linkage).
    pub merge_heights: Vec<f64>,
}

/// Result of the permutation two-sample test on mean shapes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PermutationTestResult {
    /// Elastic distance between the two group Karcher means.
    pub observed_statistic: f64,
    pub permutation_statistics: Vec<f64>,
    /// Add-one corrected: (1 + #{permuted >= observed}) / (B + 1).
    pub p_value: f64,
    pub b: usize,
    pub rng_seed: u64,
}

/// Monte Carlo estimate of the enrichment probability P(theta1 > theta2).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnrichmentResult {
    pub probability: f64,
    pub y1: usize,
    pub n1: usize,
    pub y2: usize,
    pub n2: usize,
    pub draws: usize,
    pub rng_seed: u64,
}

/// One row of an enrichment screen across covariates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnrichmentRow {
    pub covariate: String,
    pub result: EnrichmentResult,
    /// Set when probability > 0.75: the covariate concentrates in cluster 1.
    pub enriched_in_cluster1: bool,
    /// Set when probability < 0.25: the covariate concentrates in cluster 2.
    pub enriched_in_cluster2: bool,
}

fn validate_distance_matrix(d: &DistanceMatrix) -> Result<()> {
    let n = d.n();
    if n < 1 {
        return Err(Error::InvalidDistanceMatrix("empty matrix".into()));
    }
    for i in 0..n {
        if d.get(i, i).abs() > 1e-12 {
            return Err(Error::InvalidDistanceMatrix(format!(
                "nonzero diagonal at {i}"
            )));
        }
        for j in 0..n {
            let v = d.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "invalid entry {v} at ({i},{j})"
                )));
            }
            if (v - d.get(j, i)).abs() > 1e-9 {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "asymmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Agglomerative complete-linkage clustering cut to k clusters.
///
/// Inter-cluster distances are maintained with the Lance–Williams update
/// `D(k, i∪j) = max(D(k,i), D(k,j))`; ties are broken toward the smallest
/// pair of member indices so the merge sequence is deterministic.
pub fn hierarchical_cluster(d: &DistanceMatrix, k: usize) -> Result<ClusterAssignment> {
    validate_distance_matrix(d)?;
    let n = d.n();
    if k < 1 || k > n {
        return Err(Error::InvalidDistanceMatrix(format!(
            "cannot cut {n} shapes into {k} clusters"
        )));
    }

    // active[c] = smallest member index of cluster c (used for tie-breaks);
    // members[c] = shape indices.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = d.get(i, j);
        }
    }
    let mut alive: Vec<bool> = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merge_heights = Vec::with_capacity(n - 1);
    let mut n_clusters = n;

    while n_clusters > k.max(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let v = dist[i * n + j];
                let better = match &best {
                    None => true,
                    Some((bv, bi, bj)) => v < *bv || (v == *bv && (i, j) < (*bi, *bj)),
                };
                if better {
                    best = Some((v, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("at least two clusters alive");
        merge_heights.push(height);
        // Merge j into i (i < j keeps the smallest index as representative).
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        alive[j] = false;
        for c in 0..n {
            if alive[c] && c != i {
                let m = dist[c * n + i].max(dist[c * n + j]);
                dist[c * n + i] = m;
                dist[i * n + c] = m;
            }
        }
        n_clusters -= 1;
    }

    // Number surviving clusters by smallest member index.
    let mut reps: Vec<usize> = (0..n).filter(|&c| alive[c]).collect();
    reps.sort_by_key(|&c| *members[c].iter().min().unwrap());
    let mut labels = vec![0usize; n];
    for (cluster_number, &c) in reps.iter().enumerate() {
        for &shape in &members[c] {
            labels[shape] = cluster_number + 1;
        }
    }
    Ok(ClusterAssignment {
        labels,
        linkage: "complete".into(),
        k,
        merge_heights,
    })
}

/// Classical multidimensional scaling embedding with diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MdsEmbedding {
    /// Row i = coordinates of shape i, ordered by descending eigenvalue.
    pub coordinates: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centered matrix for the retained axes.
    pub eigenvalues: Vec<f64>,
    /// Total negative eigenvalue mass truncated to zero, relative to the
    /// total absolute mass; zero for exactly Euclidean-embeddable distances.
    pub negativity: f64,
}

/// Classical MDS: double-center the squared distances, eigendecompose, and
/// scale the top eigenvectors. Negative eigenvalues are truncated to zero
/// with the truncated mass recorded.
pub fn classical_mds(d: &DistanceMatrix, dims: usize) -> Result<MdsEmbedding> {
    validate_distance_matrix(d)?;
    if dims < 1 {
        return Err(Error::InvalidDistanceMatrix("dims must be >= 1".into()));
    }
    let n = d.n();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * d.get(i, j).powi(2);
        }
    }
    // Double centering: B = J A J with J = I - 11ᵀ/n.
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += grand - row_means[i] - row_means[j];
        }
    }

    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let neg_mass: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let abs_mass: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
    let negativity = if abs_mass > 0.0 { neg_mass / abs_mass } else { 0.0 };

    let dims = dims.min(n);
    let mut eigenvalues = Vec::with_capacity(dims);
    let mut axes = Vec::with_capacity(dims);
    for &col in order.iter().take(dims) {
        let lambda = eig.eigenvalues[col].max(0.0);
        eigenvalues.push(lambda);
        axes.push((col, lambda.sqrt()));
    }
    let coordinates: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            axes.iter()
                .map(|&(col, s)| eig.eigenvectors[(i, col)] * s)
                .collect()
        })
        .collect();
    Ok(MdsEmbedding {
        coordinates,
        eigenvalues,
        negativity,
    })
}

/// Group Karcher mean reusing the registrations to the pooled mean as warm
/// starts: average the group's shooting vectors, shoot from the pooled mean,
/// then run `refine_iters` full Karcher iterations on the group.
fn warm_group_mean(
    pooled_mean: &Srvf,
    shooting: &[TangentVector],
    group: &[usize],
    ensemble: &ShapeEnsemble,
    config: &AnalysisConfig,
) -> Result<Srvf> {
    let m = pooled_mean.m();
    let mut acc = TangentVector::zero(m);
    for &i in group {
        acc = acc.add(&shooting[i]);
    }
    let avg = acc.scaled(1.0 / group.len() as f64);
    let mut mean = preshape::exp_map(pooled_mean, &avg)?;
    if config.perm_refine_iters > 0 {
        let sub = ensemble.subset(group)?;
        let refined = {
            let mut cfg = config.clone();
            cfg.mean_max_iters = config.perm_refine_iters;
            shapestats::karcher_mean_with_init(&sub, mean.clone(), &cfg)?
        };
        mean = refined.mean;
    }
    Ok(mean)
}

/// Permutation two-sample test for equality of mean shapes.
///
/// The statistic is the elastic distance between the two group Karcher
/// means. Group means are computed identically for the observed labels and
/// for every permuted labeling (warm-started at the pooled mean), so the
/// statistics are exchangeable under the null. The p-value uses the add-one
/// correction, which keeps it inside (0, 1].
pub fn permutation_test_mean_shape(
    ensemble: &ShapeEnsemble,
    labels: &[bool],
    b: usize,
    rng_seed: u64,
    config: &AnalysisConfig,
) -> Result<PermutationTestResult> {
    if labels.len() != ensemble.len() {
        return Err(Error::InvalidEnsemble(format!(
            "{} labels for {} shapes",
            labels.len(),
            ensemble.len()
        )));
    }
    let n1 = labels.iter().filter(|&&l| l).count();
    let n2 = labels.len() - n1;
    if n1 < 2 || n2 < 2 {
        return Err(Error::GroupTooSmall { n1, n2, min: 2 });
    }
    if b < 99 {
        return Err(Error::InvalidCounts(format!(
            "need at least 99 permutations, got {b}"
        )));
    }

    let pooled = shapestats::karcher_mean(ensemble, config)?;
    let statistic = |labels: &[bool]| -> Result<f64> {
        let g1: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let g2: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        let m1 = warm_group_mean(&pooled.mean, &pooled.shooting, &g1, &pooled.registered, config)?;
        let m2 = warm_group_mean(&pooled.mean, &pooled.shooting, &g2, &pooled.registered, config)?;
        Ok(registration::distance_shape(&m1, &m2, config)?.0)
    };

    let observed = statistic(labels)?;
    let stats: Vec<Result<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ (rep as u64).wrapping_mul(0x9E3779B97F4A7C15));
            let mut permuted = labels.to_vec();
            permuted.shuffle(&mut rng);
            statistic(&permuted)
        })
        .collect();
    let mut permutation_statistics = Vec::with_capacity(b);
    for s in stats {
        permutation_statistics.push(s?);
    }
    let exceed = permutation_statistics
        .iter()
        .filter(|&&s| s >= observed)
        .count();
    let p_value = (1 + exceed) as f64 / (b + 1) as f64;
    Ok(PermutationTestResult {
        observed_statistic: observed,
        permutation_statistics,
        p_value,
        b,
        rng_seed,
    })
}

/// Monte Carlo estimate of P(theta1 > theta2) for independent Beta
/// posteriors Beta(y+1, n-y+1). Zero-count sides fall back to the uniform
/// Beta(1,1) prior, so covariates constant across the sample stay
/// well-defined.
pub fn enrichment_probability(
    y1: usize,
    n1: usize,
    y2: usize,
    n2: usize,
    draws: usize,
    rng_seed: u64,
) -> Result<EnrichmentResult> {
    if y1 > n1 || y2 > n2 {
        return Err(Error::InvalidCounts(format!(
            "occurrences exceed totals: {y1}/{n1}, {y2}/{n2}"
        )));
    }
    if draws < 10_000 {
        return Err(Error::InvalidCounts(format!(
            "need at least 10000 draws, got {draws}"
        )));
    }
    let beta1 = Beta::new((y1 + 1) as f64, (n1 - y1 + 1) as f64)
        .map_err(|e| Error::InvalidCounts(e.to_string()))?;
    let beta2 = Beta::new((y2 + 1) as f64, (n2 - y2 + 1) as f64)
        .map_err(|e| Error::InvalidCounts(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut hits = 0usize;
    for _ in 0..draws {
        let t1 = beta1.sample(&mut rng);
        let t2 = beta2.sample(&mut rng);
        if t1 > t2 {
            hits += 1;
        }
    }
    Ok(EnrichmentResult {
        probability: hits as f64 / draws as f64,
        y1,
        n1,
        y2,
        n2,
        draws,
        rng_seed,
    })
}

/// Enrichment screen over dichotomous covariates for a 2-cluster assignment.
///
/// For each covariate, y1 counts covariate-positive shapes inside cluster 1
/// (n1 = all positives) and y2 counts covariate-negative shapes inside
/// cluster 1 (n2 = all negatives). Probabilities above 0.75 flag enrichment
/// in cluster 1, below 0.25 in cluster 2; the flags are mutually exclusive
/// by construction. Covariates that are not 0/1-codable are skipped and
/// returned in the second list.
pub fn enrichment_screen(
    assignment: &ClusterAssignment,
    covariates: &[(String, Vec<Option<u8>>)],
    draws: usize,
    rng_seed: u64,
) -> Result<(Vec<EnrichmentRow>, Vec<String>)> {
    if assignment.k != 2 {
        return Err(Error::InvalidDistanceMatrix(format!(
            "enrichment needs a 2-cluster assignment, got k = {}",
            assignment.k
        )));
    }
    let n = assignment.labels.len();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (idx, (name, values)) in covariates.iter().enumerate() {
        if values.len() != n {
            return Err(Error::NonBinaryCovariate {
                name: name.clone(),
                reason: format!("{} values for {} shapes", values.len(), n),
            });
        }
        if values.iter().flatten().any(|&v| v > 1) {
            skipped.push(name.clone());
            continue;
        }
        let mut y1 = 0usize;
        let mut n1 = 0usize;
        let mut y2 = 0usize;
        let mut n2 = 0usize;
        for (i, v) in values.iter().enumerate() {
            let Some(v) = v else { continue };
            let in_c1 = assignment.labels[i] == 1;
            if *v == 1 {
                n1 += 1;
                if in_c1 {
                    y1 += 1;
                }
            } else {
                n2 += 1;
                if in_c1 {
                    y2 += 1;
                }
            }
        }
        let result =
            enrichment_probability(y1, n1, y2, n2, draws, rng_seed.wrapping_add(idx as u64))?;
        let p = result.probability;
        rows.push(EnrichmentRow {
            covariate: name.clone(),
            enriched_in_cluster1: p > 0.75,
            enriched_in_cluster2: p < 0.25,
            result,
        });
    }
    Ok((rows, skipped))
}
