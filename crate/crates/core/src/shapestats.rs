//! Population statistics on the shape space: Karcher means, tangent-space
//! PCA, random shape generation and leave-one-out reconstruction error.
//!
//! The Karcher mean minimizes the sum of squared elastic distances over the
//! ensemble. It is found by gradient descent: register every shape to the
//! current mean, average the shooting vectors obtained from the inverse
//! exponential map, and step along the average. PCA happens in the tangent
//! space at the mean, where shooting vectors are ordinary vectors and the
//! covariance is a finite matrix.

use nalgebra::{DMatrix, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::AnalysisConfig;
use crate::ensemble::ShapeEnsemble;
use crate::error::{Error, Result};
use crate::preshape::{self, TangentVector};
use crate::registration;
use crate::srvf::Srvf;

/// Square of the shape-distance upper bound: the largest possible
/// reconstruction error.
pub const MAX_RECONSTRUCTION_ERROR: f64 =
    std::f64::consts::FRAC_PI_2 * std::f64::consts::FRAC_PI_2;

/// Output of a Karcher mean computation.
#[derive(Debug, Clone)]
pub struct KarcherMean {
    /// The chosen representative of the mean shape class; its gauge
    /// (orientation, seed) is inherited from the medoid initialization.
    pub mean: Srvf,
    /// The input shapes registered to the mean.
    pub registered: ShapeEnsemble,
    /// Shooting vectors from the mean to each registered shape, recomputed
    /// after convergence.
    pub shooting: Vec<TangentVector>,
    /// Karcher variance (mean squared distance to the mean) per iteration.
    pub variance_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Karcher mean plus tangent PCA of an ensemble.
#[derive(Debug, Clone)]
pub struct SpcaModel {
    pub mean: Srvf,
    /// Centered shooting vectors (the mean-convergence residual is removed,
    /// which keeps the sample rank at n-1 and the coefficient round trip
    /// exact).
    pub shooting_vectors: Vec<TangentVector>,
    /// Descending nonnegative eigenvalues of the tangent covariance.
    pub eigenvalues: Vec<f64>,
    /// L²-orthonormal principal directions, one tangent field per retained
    /// eigenvalue.
    pub eigenvectors: Vec<TangentVector>,
    /// Principal coefficients, row i = shape i, column j = direction j.
    pub coefficients: Vec<Vec<f64>>,
    /// Trace of the tangent covariance.
    pub total_variance: f64,
    pub ids: Vec<String>,
}

impl SpcaModel {
    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&s| s > 0.0).count()
    }
}

/// Leave-one-out reconstruction error report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReconstructionReport {
    pub per_shape_error: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub median_absolute_deviation: f64,
}

impl ReconstructionReport {
    fn from_errors(per_shape_error: Vec<f64>) -> Self {
        let n = per_shape_error.len() as f64;
        let mean = per_shape_error.iter().sum::<f64>() / n;
        let var = per_shape_error
            .iter()
            .map(|e| (e - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        let median = median_of(&per_shape_error);
        let deviations: Vec<f64> = per_shape_error
            .iter()
            .map(|e| (e - median).abs())
            .collect();
        ReconstructionReport {
            mean,
            std: var.sqrt(),
            median,
            median_absolute_deviation: median_of(&deviations),
            per_shape_error,
        }
    }
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Register every shape to `mean` and return registered copies, shooting
/// vectors and squared distances. Uses the forward registration only: the
/// shooting vector's length is the geodesic distance to the registered copy,
/// which keeps the descent functional and its gradient consistent.
fn register_all(
    mean: &Srvf,
    ensemble: &ShapeEnsemble,
    config: &AnalysisConfig,
) -> Result<(Vec<Srvf>, Vec<TangentVector>, Vec<f64>)> {
    let results: Vec<Result<(Srvf, TangentVector, f64)>> = ensemble
        .shapes()
        .par_iter()
        .map(|q| {
            let reg = registration::optimal_reparam_dp(mean, q, config)?;
            let v = preshape::inverse_exp(
                mean,
                &reg.registered_srvf,
                config.geodesic_waypoints,
                config.geodesic_tol,
                config.geodesic_max_iters,
            )?;
            let d = v.norm();
            Ok((reg.registered_srvf, v, d * d))
        })
        .collect();
    let mut registered = Vec::with_capacity(ensemble.len());
    let mut shooting = Vec::with_capacity(ensemble.len());
    let mut sq = Vec::with_capacity(ensemble.len());
    for (i, r) in results.into_iter().enumerate() {
        let (q, v, d2) = r.map_err(|e| e.for_shape(ensemble.id(i)))?;
        registered.push(q);
        shooting.push(v.with_base_id("mean"));
        sq.push(d2);
    }
    Ok((registered, shooting, sq))
}

fn average_tangent(vectors: &[TangentVector], m: usize) -> TangentVector {
    let mut acc = vec![Vector2::zeros(); m];
    for v in vectors {
        for (a, s) in acc.iter_mut().zip(v.samples()) {
            *a += s;
        }
    }
    let inv = 1.0 / vectors.len().max(1) as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    TangentVector::from_samples(acc)
}

/// Karcher mean by gradient descent from an explicit starting point.
///
/// Used directly for warm starts (permutation tests, leave-one-out refits);
/// [`karcher_mean`] wraps it with the medoid initialization.
pub fn karcher_mean_with_init(
    ensemble: &ShapeEnsemble,
    init: Srvf,
    config: &AnalysisConfig,
) -> Result<KarcherMean> {
    let m = ensemble.m();
    let mut mean = init;
    let mut variance_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..config.mean_max_iters {
        iterations = iter + 1;
        let (_registered, shooting, sq) = register_all(&mean, ensemble, config)?;
        let variance: f64 = sq.iter().sum::<f64>() / ensemble.len() as f64;
        if let Some(&prev) = variance_trace.last() {
            debug_assert!(
                variance <= prev + 1e-6,
                "Karcher variance increased: {prev} -> {variance}"
            );
        }
        variance_trace.push(variance);

        let avg = average_tangent(&shooting, m);
        let update = avg.scaled(config.mean_step);
        if update.norm() < config.mean_tol {
            converged = true;
            break;
        }
        mean = preshape::exp_map(&mean, &update)?;
    }

    // Recompute registrations and shooting vectors at the final mean.
    let (registered, shooting, sq) = register_all(&mean, ensemble, config)?;
    variance_trace.push(sq.iter().sum::<f64>() / ensemble.len() as f64);
    Ok(KarcherMean {
        mean,
        registered: ensemble.with_shapes(registered),
        shooting,
        variance_trace,
        converged,
        iterations,
    })
}

/// Karcher (Frechet) mean of an ensemble under the elastic shape distance.
///
/// Initialization is the medoid: the ensemble element with the smallest sum
/// of squared distances to the others, which is deterministic and lies
/// inside the data's geodesic ball. Convergence (and the variance trace) is
/// reported, never silently assumed.
pub fn karcher_mean(ensemble: &ShapeEnsemble, config: &AnalysisConfig) -> Result<KarcherMean> {
    let n = ensemble.len();
    if n == 1 {
        let mean = ensemble.shape(0).clone();
        return Ok(KarcherMean {
            mean: mean.clone(),
            registered: ensemble.clone(),
            shooting: vec![TangentVector::zero(ensemble.m())],
            variance_trace: vec![0.0],
            converged: true,
            iterations: 0,
        });
    }
    let init = medoid(ensemble, config)?;
    karcher_mean_with_init(ensemble, init, config)
}

/// Medoid of the ensemble under the elastic distance (unordered pairs
/// computed once; the matrix is treated as symmetric).
fn medoid(ensemble: &ShapeEnsemble, config: &AnalysisConfig) -> Result<Srvf> {
    let n = ensemble.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let distances: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            Ok(registration::distance_shape(ensemble.shape(i), ensemble.shape(j), config)?.0)
        })
        .collect();
    let mut sums = vec![0.0f64; n];
    for (&(i, j), d) in pairs.iter().zip(distances) {
        let d = d?;
        sums[i] += d * d;
        sums[j] += d * d;
    }
    let best = sums
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("n >= 1");
    Ok(ensemble.shape(best).clone())
}

/// Tangent covariance and shape PCA at a given mean.
///
/// Shooting vectors are stacked as 2m-vectors with quadrature weights so the
/// matrix eigenproblem reproduces L² inner products. The vectors are centered
/// first: at an exactly converged Karcher mean their average vanishes, and
/// removing the numerical residual keeps the number of positive eigenvalues
/// at n-1 and makes reconstruction from full coefficients exact.
pub fn covariance_and_spca(
    mean: &Srvf,
    shooting: &[TangentVector],
    ids: &[String],
) -> Result<SpcaModel> {
    let n = shooting.len();
    if n < 2 {
        return Err(Error::InvalidEnsemble(format!(
            "tangent PCA needs at least 2 shapes, got {n}"
        )));
    }
    let m = mean.m();
    let dim = 2 * m;
    let sqrt_w = (1.0 / m as f64).sqrt();

    let avg = average_tangent(shooting, m);
    let centered: Vec<TangentVector> = shooting.iter().map(|v| v.sub(&avg)).collect();

    // Columns are sqrt(w)-scaled so Euclidean products equal L² products.
    let mut v = DMatrix::zeros(dim, n);
    for (col, t) in centered.iter().enumerate() {
        for (row, s) in t.samples().iter().enumerate() {
            v[(2 * row, col)] = s.x * sqrt_w;
            v[(2 * row + 1, col)] = s.y * sqrt_w;
        }
    }
    let cov = &v * v.transpose() / (n as f64 - 1.0);
    let total_variance = cov.trace();

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    // A centered sample of n vectors spans at most n-1 directions; anything
    // past that (and numerical dust) is truncated to exactly zero.
    let max_rank = (n - 1).min(dim);
    let floor = eig.eigenvalues[order[0]].abs().max(1e-300) * 1e-12;
    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    for &col in order.iter().take(max_rank) {
        let lambda = eig.eigenvalues[col];
        if lambda <= floor {
            break;
        }
        eigenvalues.push(lambda);
        // Unscale so the direction is L²-orthonormal.
        let samples: Vec<Vector2<f64>> = (0..m)
            .map(|row| {
                Vector2::new(
                    eig.eigenvectors[(2 * row, col)] / sqrt_w,
                    eig.eigenvectors[(2 * row + 1, col)] / sqrt_w,
                )
            })
            .collect();
        eigenvectors.push(TangentVector::from_samples(samples).with_base_id("mean"));
    }

    let coefficients: Vec<Vec<f64>> = centered
        .iter()
        .map(|t| eigenvectors.iter().map(|u| u.inner(t)).collect())
        .collect();

    Ok(SpcaModel {
        mean: mean.clone(),
        shooting_vectors: centered,
        eigenvalues,
        eigenvectors,
        coefficients,
        total_variance,
        ids: ids.to_vec(),
    })
}

/// Fit mean and sPCA to an ensemble in one call.
pub fn fit_spca(ensemble: &ShapeEnsemble, config: &AnalysisConfig) -> Result<(KarcherMean, SpcaModel)> {
    let km = karcher_mean(ensemble, config)?;
    let model = covariance_and_spca(&km.mean, &km.shooting, ensemble.ids())?;
    Ok((km, model))
}

/// Orthogonal projection of a tangent vector onto the top-r principal
/// directions.
pub fn reconstruct_tangent(model: &SpcaModel, v: &TangentVector, r: usize) -> TangentVector {
    let m = model.mean.m();
    let mut out = TangentVector::zero(m);
    for u in model.eigenvectors.iter().take(r) {
        out = out.add(&u.scaled(u.inner(v)));
    }
    out
}

/// One held-out shape with its model-based reconstruction, both expressed at
/// the leave-one-out mean (used for overlay figures).
#[derive(Debug, Clone)]
pub struct LooShapePair {
    pub true_shape: Srvf,
    pub reconstructed: Srvf,
}

/// Leave-one-out reconstruction error of the sPCA model.
///
/// For each shape the mean and principal basis are refit on the remaining
/// n-1 shapes (warm-started from the full-ensemble mean), the held-out shape
/// is registered to that mean, and the squared residual of its shooting
/// vector after projection onto the n-2-direction basis is recorded.
pub fn loo_reconstruction(
    ensemble: &ShapeEnsemble,
    config: &AnalysisConfig,
) -> Result<ReconstructionReport> {
    Ok(loo_reconstruction_detailed(ensemble, config)?.0)
}

/// As [`loo_reconstruction`], additionally returning the registered held-out
/// shapes and their reconstructions.
pub fn loo_reconstruction_detailed(
    ensemble: &ShapeEnsemble,
    config: &AnalysisConfig,
) -> Result<(ReconstructionReport, Vec<LooShapePair>)> {
    let n = ensemble.len();
    if n < 3 {
        return Err(Error::InvalidEnsemble(format!(
            "leave-one-out needs at least 3 shapes, got {n}"
        )));
    }
    let full = karcher_mean(ensemble, config)?;

    let outcomes: Vec<Result<(f64, LooShapePair)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let sub = ensemble.subset(&keep)?;
            let refit = karcher_mean_with_init(&sub, full.mean.clone(), config)
                .map_err(|e| e.for_shape(ensemble.id(i)))?;
            let model = covariance_and_spca(&refit.mean, &refit.shooting, sub.ids())?;

            let (_, reg) = registration::distance_shape(&refit.mean, ensemble.shape(i), config)?;
            let v = preshape::inverse_exp(
                &refit.mean,
                &reg.registered_srvf,
                config.geodesic_waypoints,
                config.geodesic_tol,
                config.geodesic_max_iters,
            )?;
            let r = model.rank().min(n - 2);
            let recon = reconstruct_tangent(&model, &v, r);
            let resid = v.sub(&recon);
            let pair = LooShapePair {
                true_shape: reg.registered_srvf,
                reconstructed: preshape::exp_map(&refit.mean, &recon)?,
            };
            Ok((resid.inner(&resid), pair))
        })
        .collect();

    let mut per_shape = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for (i, e) in outcomes.into_iter().enumerate() {
        let (err, pair) = e.map_err(|err| err.for_shape(ensemble.id(i)))?;
        per_shape.push(err);
        pairs.push(pair);
    }
    Ok((ReconstructionReport::from_errors(per_shape), pairs))
}

/// Draw a random shape from the wrapped normal distribution of the model:
/// `s = Σ sqrt(σ_i) Z_i u_i` in the tangent space at the mean, pushed through
/// the exponential map. Deterministic given the seed.
pub fn random_shape(model: &SpcaModel, rng_seed: u64, kappa: usize) -> Result<Srvf> {
    let kappa = kappa.min(model.rank());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let m = model.mean.m();
    let mut s = TangentVector::zero(m);
    for i in 0..kappa {
        let z: f64 = StandardNormal.sample(&mut rng);
        s = s.add(&model.eigenvectors[i].scaled(model.eigenvalues[i].sqrt() * z));
    }
    // Numerical dust from eigenvector unscaling can leave s slightly off the
    // tangent space; re-project before shooting.
    let s = preshape::project_tangent(&model.mean, s.samples());
    preshape::exp_map(&model.mean, &s)
}

/// Shapes along the j-th principal direction: `exp_mean(t sqrt(σ_j) u_j)`
/// for each requested t. `t = 0` returns the mean exactly.
pub fn principal_direction_path(
    model: &SpcaModel,
    j: usize,
    t_values: &[f64],
) -> Result<Vec<Srvf>> {
    if j >= model.rank() {
        return Err(Error::InvalidEnsemble(format!(
            "direction {j} out of range (rank {})",
            model.rank()
        )));
    }
    let sigma = model.eigenvalues[j].sqrt();
    t_values
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Ok(model.mean.clone())
            } else {
                preshape::exp_map(&model.mean, &model.eigenvectors[j].scaled(t * sigma))
            }
        })
        .collect()
}
