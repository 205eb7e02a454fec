//! Geometry of the pre-shape space of unit-length closed curves.
//!
//! The pre-shape space is the set of SRVFs with unit L² norm satisfying the
//! closure condition `∫ q|q| dt = 0`; it is a codimension-2 submanifold of
//! the unit Hilbert sphere. This module provides the constraint projection,
//! tangent-space projection, exponential and inverse exponential maps, and
//! geodesics computed by path straightening: a discrete path between two
//! points is iteratively deformed by projected gradient descent on the path
//! energy until it is (numerically) a geodesic.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::srvf::{self, Srvf};

/// Tolerance below which the closure projection accepts a point.
pub const CLOSURE_TOL: f64 = 1e-6;
/// Tolerance on the unit-norm constraint after projection.
pub const NORM_TOL: f64 = 1e-8;
const MAX_PROJECTION_ITERS: usize = 200;

/// A perturbation field attached to a base SRVF: orthogonal to the base in
/// L² (sphere tangency) and to the closure-constraint gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    samples: Vec<Vector2<f64>>,
    base_id: String,
}

impl TangentVector {
    pub fn samples(&self) -> &[Vector2<f64>] {
        &self.samples
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn base_id(&self) -> &str {
        &self.base_id
    }

    pub fn with_base_id(mut self, id: impl Into<String>) -> Self {
        self.base_id = id.into();
        self
    }

    pub fn zero(m: usize) -> Self {
        TangentVector {
            samples: vec![Vector2::zeros(); m],
            base_id: String::new(),
        }
    }

    pub fn norm(&self) -> f64 {
        srvf::norm(&self.samples)
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        srvf::inner(&self.samples, &other.samples)
    }

    pub fn scaled(&self, factor: f64) -> TangentVector {
        TangentVector {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            base_id: self.base_id.clone(),
        }
    }

    pub fn add(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            base_id: self.base_id.clone(),
        }
    }

    pub fn sub(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            base_id: self.base_id.clone(),
        }
    }

    pub(crate) fn from_samples(samples: Vec<Vector2<f64>>) -> Self {
        TangentVector {
            samples,
            base_id: String::new(),
        }
    }
}

/// A discrete geodesic: waypoints at uniform path parameters, the path
/// length (the pre-shape distance when converged), and solver diagnostics.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub waypoints: Vec<Srvf>,
    pub length: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Path energy after each straightening iteration (index 0 = initial
    /// path); non-increasing by construction of the line search.
    pub energy_trace: Vec<f64>,
}

impl GeodesicPath {
    /// Sum of great-circle arcs between consecutive waypoints. Each arc is at
    /// least the chord, so the total never undershoots the sphere distance
    /// between the endpoints.
    fn measure_length(waypoints: &[Srvf]) -> f64 {
        waypoints
            .windows(2)
            .map(|w| w[0].sphere_distance(&w[1]))
            .sum()
    }
}

/// Gradients of the two closure constraints `G_j(q) = ∫ q_j |q| dt` at `q`.
fn closure_gradients(q: &[Vector2<f64>]) -> [Vec<Vector2<f64>>; 2] {
    let m = q.len();
    let mut g1 = Vec::with_capacity(m);
    let mut g2 = Vec::with_capacity(m);
    for s in q {
        let mag = s.norm().max(1e-300);
        let unit = s / mag;
        g1.push(Vector2::new(mag + s.x * unit.x, s.x * unit.y));
        g2.push(Vector2::new(s.y * unit.x, mag + s.y * unit.y));
    }
    [g1, g2]
}

/// Project raw samples onto the pre-shape space.
///
/// Alternates unit-norm rescaling with Newton steps on the 2-dimensional
/// closure residual `G(q) = ∫ q|q| dt`, moving along the constraint
/// gradients. The Newton system uses the closed form
/// `J = ||q||² I + 3 ∫ q qᵀ dt`.
pub fn project_closure(raw: &[Vector2<f64>]) -> Result<Srvf> {
    let m = raw.len();
    let inv_m = 1.0 / m as f64;
    let mut q: Vec<Vector2<f64>> = raw.to_vec();

    for iter in 0..MAX_PROJECTION_ITERS {
        let norm = srvf::norm(&q);
        if !(norm > 1e-12) {
            return Err(Error::ProjectionDiverged {
                iterations: iter,
                residual: f64::INFINITY,
            });
        }
        for s in q.iter_mut() {
            *s /= norm;
        }

        let mut residual = Vector2::zeros();
        let mut outer = Matrix2::zeros();
        for s in &q {
            residual += s * s.norm();
            outer += s * s.transpose();
        }
        residual *= inv_m;
        outer *= inv_m;

        if residual.norm() < CLOSURE_TOL {
            return Ok(Srvf::from_samples_unchecked(q, 1.0));
        }

        let jac = Matrix2::identity() + 3.0 * outer;
        let delta = match jac.lu().solve(&(-residual)) {
            Some(d) => d,
            None => {
                return Err(Error::ProjectionDiverged {
                    iterations: iter,
                    residual: residual.norm(),
                })
            }
        };
        let grads = closure_gradients(&q);
        for (i, s) in q.iter_mut().enumerate() {
            *s += grads[0][i] * delta.x + grads[1][i] * delta.y;
        }
    }

    let residual = Srvf::from_samples_unchecked(q, 1.0).closure_residual().norm();
    Err(Error::ProjectionDiverged {
        iterations: MAX_PROJECTION_ITERS,
        residual,
    })
}

/// Project an arbitrary field onto the tangent space of the pre-shape space
/// at `q`: removes the component along `q` and along an orthonormalized
/// basis of the closure-constraint gradients.
pub fn project_tangent(q: &Srvf, w: &[Vector2<f64>]) -> TangentVector {
    let qs = q.samples();
    let mut v: Vec<Vector2<f64>> = w.to_vec();

    let remove = |v: &mut Vec<Vector2<f64>>, dir: &[Vector2<f64>]| {
        let d2 = srvf::inner(dir, dir);
        if d2 > 1e-30 {
            let c = srvf::inner(v, dir) / d2;
            for (x, d) in v.iter_mut().zip(dir) {
                *x -= d * c;
            }
        }
    };

    remove(&mut v, qs);
    let grads = closure_gradients(qs);
    let mut basis: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(2);
    for g in grads.iter() {
        let mut b = g.clone();
        remove(&mut b, qs);
        for prev in &basis {
            remove(&mut b, prev);
        }
        basis.push(b);
    }
    for b in &basis {
        remove(&mut v, b);
    }
    // One more sweep against q: the basis removal is exact, but a second
    // pass keeps sphere tangency at machine precision.
    remove(&mut v, qs);
    TangentVector::from_samples(v)
}

/// Exponential map: follow the sphere great circle from `q` in direction `v`
/// for arc length `||v||`, then project back onto the pre-shape space.
/// The zero vector maps to `q` exactly.
pub fn exp_map(q: &Srvf, v: &TangentVector) -> Result<Srvf> {
    let len = v.norm();
    if len < 1e-14 {
        return Ok(q.clone());
    }
    let (c, s) = (len.cos(), len.sin());
    let moved: Vec<Vector2<f64>> = q
        .samples()
        .iter()
        .zip(v.samples())
        .map(|(qi, vi)| qi * c + vi * (s / len))
        .collect();
    Ok(project_closure(&moved)?.with_scale(q.scale()))
}

/// Inverse exponential map: the tangent vector at `q1` whose exponential
/// reaches `q2`, extracted from the path-straightening geodesic as the
/// first-segment velocity rescaled to the path length.
pub fn inverse_exp(q1: &Srvf, q2: &Srvf, k: usize, tol: f64, max_iters: usize) -> Result<TangentVector> {
    let inner = q1.inner(q2);
    if inner <= -1.0 + 1e-9 {
        return Err(Error::AntipodalPair { inner });
    }
    let path = geodesic(q1, q2, k, tol, max_iters)?;
    if !path.converged {
        return Err(Error::GeodesicNotConverged {
            iterations: path.iterations,
            last_decrease: f64::NAN,
        });
    }
    if path.length < 1e-12 {
        return Ok(TangentVector::zero(q1.m()));
    }
    let chord: Vec<Vector2<f64>> = path.waypoints[1]
        .samples()
        .iter()
        .zip(q1.samples())
        .map(|(b, a)| b - a)
        .collect();
    let dir = project_tangent(q1, &chord);
    let dn = dir.norm();
    if dn < 1e-14 {
        return Ok(TangentVector::zero(q1.m()));
    }
    Ok(dir.scaled(path.length / dn))
}

/// Initial path: great circle between the endpoints on the sphere, projected
/// onto the pre-shape space waypoint by waypoint.
fn initial_path(q1: &Srvf, q2: &Srvf, k: usize) -> Result<Vec<Srvf>> {
    let psi = q1.sphere_distance(q2);
    let mut waypoints = Vec::with_capacity(k);
    waypoints.push(q1.clone());
    for j in 1..k - 1 {
        let tau = j as f64 / (k - 1) as f64;
        let blended: Vec<Vector2<f64>> = if psi < 1e-8 {
            q1.samples()
                .iter()
                .zip(q2.samples())
                .map(|(a, b)| a * (1.0 - tau) + b * tau)
                .collect()
        } else {
            let sa = ((1.0 - tau) * psi).sin() / psi.sin();
            let sb = (tau * psi).sin() / psi.sin();
            q1.samples()
                .iter()
                .zip(q2.samples())
                .map(|(a, b)| a * sa + b * sb)
                .collect()
        };
        waypoints.push(project_closure(&blended)?);
    }
    waypoints.push(q2.clone());
    Ok(waypoints)
}

fn path_energy(waypoints: &[Srvf]) -> f64 {
    let k = waypoints.len();
    let scale = (k - 1) as f64;
    let mut acc = 0.0;
    for w in waypoints.windows(2) {
        let d: Vec<Vector2<f64>> = w[0]
            .samples()
            .iter()
            .zip(w[1].samples())
            .map(|(a, b)| b - a)
            .collect();
        acc += srvf::inner(&d, &d);
    }
    acc * scale
}

/// Compute the geodesic between two pre-shapes by path straightening.
///
/// The path is initialized on the projected great circle and straightened by
/// gradient descent on the discrete path energy: each interior waypoint moves
/// toward the midpoint of its neighbors along its tangent space, with a
/// backtracking line search (halving from 1.0) that keeps the energy
/// monotone non-increasing. Iteration stops when the relative energy decrease
/// falls below `tol` (or the step size collapses, which means the energy is
/// stationary) or after `max_iters` iterations.
pub fn geodesic(q1: &Srvf, q2: &Srvf, k: usize, tol: f64, max_iters: usize) -> Result<GeodesicPath> {
    if q1.m() != q2.m() {
        return Err(Error::SampleCountMismatch {
            left: q1.m(),
            right: q2.m(),
        });
    }
    let k = k.max(5);

    // Degenerate case: identical endpoints give the constant path.
    let direct: Vec<Vector2<f64>> = q1
        .samples()
        .iter()
        .zip(q2.samples())
        .map(|(a, b)| b - a)
        .collect();
    if srvf::norm(&direct) < 1e-9 {
        return Ok(GeodesicPath {
            waypoints: vec![q1.clone(); k],
            length: 0.0,
            converged: true,
            iterations: 0,
            energy_trace: vec![0.0],
        });
    }

    let mut waypoints = initial_path(q1, q2, k)?;
    let mut energy = path_energy(&waypoints);
    let mut trace = vec![energy];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter + 1;
        // Preconditioned descent direction: step 1.0 puts each interior
        // waypoint at the tangent projection of its neighbors' midpoint.
        let mut directions: Vec<TangentVector> = Vec::with_capacity(k - 2);
        for j in 1..k - 1 {
            let prev = waypoints[j - 1].samples();
            let next = waypoints[j + 1].samples();
            let here = waypoints[j].samples();
            let d: Vec<Vector2<f64>> = (0..here.len())
                .map(|i| (prev[i] + next[i]) * 0.5 - here[i])
                .collect();
            directions.push(project_tangent(&waypoints[j], &d));
        }

        let mut step = 1.0;
        let mut improved = false;
        while step >= 1e-6 {
            let mut candidate = waypoints.clone();
            let mut feasible = true;
            for (j, dir) in directions.iter().enumerate() {
                let moved: Vec<Vector2<f64>> = candidate[j + 1]
                    .samples()
                    .iter()
                    .zip(dir.samples())
                    .map(|(x, d)| x + d * step)
                    .collect();
                match project_closure(&moved) {
                    Ok(p) => candidate[j + 1] = p.with_scale(waypoints[j + 1].scale()),
                    Err(_) => {
                        feasible = false;
                        break;
                    }
                }
            }
            if feasible {
                let cand_energy = path_energy(&candidate);
                if cand_energy <= energy {
                    let rel = if energy > 0.0 {
                        (energy - cand_energy) / energy
                    } else {
                        0.0
                    };
                    waypoints = candidate;
                    energy = cand_energy;
                    trace.push(energy);
                    improved = true;
                    if rel < tol {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            // Line search exhausted: the energy is stationary.
            trace.push(energy);
            converged = true;
        }
        if converged {
            break;
        }
    }

    let length = GeodesicPath::measure_length(&waypoints);
    Ok(GeodesicPath {
        waypoints,
        length,
        converged,
        iterations,
        energy_trace: trace,
    })
}

/// Pre-shape geodesic distance: length of the path-straightening geodesic.
pub fn distance_preshape(q1: &Srvf, q2: &Srvf, k: usize, tol: f64, max_iters: usize) -> Result<f64> {
    Ok(geodesic(q1, q2, k, tol, max_iters)?.length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use approx::assert_relative_eq;

    const K: usize = 7;
    const TOL: f64 = 1e-6;
    const ITERS: usize = 300;

    #[test]
    fn projecting_a_projected_srvf_is_idempotent() {
        let q = synthetic::random_srvf(3, 128).unwrap();
        let again = project_closure(q.samples()).unwrap();
        let diff: Vec<Vector2<f64>> = q
            .samples()
            .iter()
            .zip(again.samples())
            .map(|(a, b)| a - b)
            .collect();
        assert!(srvf::norm(&diff) < 1e-6);
    }

    #[test]
    fn open_arc_projects_to_feasible_point() {
        // Quarter circle: decidedly not closed.
        let m = 128;
        let samples: Vec<Vector2<f64>> = (0..m)
            .map(|i| {
                let t = i as f64 / m as f64;
                let ang = 0.5 * std::f64::consts::PI * t;
                Vector2::new(-ang.sin(), ang.cos())
            })
            .collect();
        let q = project_closure(&samples).unwrap();
        assert!((q.norm() - 1.0).abs() < NORM_TOL);
        assert!(q.closure_residual().norm() < CLOSURE_TOL);
    }

    #[test]
    fn zero_input_diverges() {
        let samples = vec![Vector2::zeros(); 64];
        assert!(matches!(
            project_closure(&samples),
            Err(Error::ProjectionDiverged { .. })
        ));
    }

    #[test]
    fn tangent_projection_kills_base_component() {
        let q = synthetic::random_srvf(5, 128).unwrap();
        let v = project_tangent(&q, q.samples());
        assert!(v.norm() < 1e-8);
    }

    #[test]
    fn tangent_projection_is_idempotent_and_orthogonal() {
        let q = synthetic::random_srvf(7, 128).unwrap();
        let w: Vec<Vector2<f64>> = synthetic::random_srvf(8, 128).unwrap().samples().to_vec();
        let v = project_tangent(&q, &w);
        let again = project_tangent(&q, v.samples());
        let diff: Vec<Vector2<f64>> = v
            .samples()
            .iter()
            .zip(again.samples())
            .map(|(a, b)| a - b)
            .collect();
        assert!(srvf::norm(&diff) < 1e-8);

        // Orthogonal to base and to raw constraint gradients.
        assert!(srvf::inner(v.samples(), q.samples()).abs() < 1e-6);
        let grads = closure_gradients(q.samples());
        for g in grads.iter() {
            assert!(srvf::inner(v.samples(), g).abs() < 1e-5);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let q = synthetic::random_srvf(11, 128).unwrap();
        let v = TangentVector::zero(128);
        let out = exp_map(&q, &v).unwrap();
        assert_eq!(out.samples(), q.samples());
    }

    #[test]
    fn exp_of_tiny_vector_stays_close() {
        let q = synthetic::random_srvf(13, 128).unwrap();
        let w: Vec<Vector2<f64>> = synthetic::random_srvf(14, 128).unwrap().samples().to_vec();
        let v = project_tangent(&q, &w);
        let v = v.scaled(1e-6 / v.norm());
        let out = exp_map(&q, &v).unwrap();
        let diff: Vec<Vector2<f64>> = q
            .samples()
            .iter()
            .zip(out.samples())
            .map(|(a, b)| a - b)
            .collect();
        assert!(srvf::norm(&diff) < 2e-6);
    }

    #[test]
    fn exp_log_round_trip() {
        let q = synthetic::random_srvf(17, 128).unwrap();
        let w: Vec<Vector2<f64>> = synthetic::random_srvf(18, 128).unwrap().samples().to_vec();
        let v = project_tangent(&q, &w);
        let v = v.scaled(0.3 / v.norm());
        let q2 = exp_map(&q, &v).unwrap();
        let back = inverse_exp(&q, &q2, K, TOL, ITERS).unwrap();
        let err = v.sub(&back).norm();
        assert!(err < 1e-3, "round-trip error {err}");
    }

    #[test]
    fn inverse_exp_of_identical_points_is_zero() {
        let q = synthetic::random_srvf(19, 128).unwrap();
        let v = inverse_exp(&q, &q, K, TOL, ITERS).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn inverse_exp_norm_matches_geodesic_length() {
        let q1 = crate::contour::to_srvf(&synthetic::circle(1.0, 512), 128).unwrap();
        let q2 = {
            let pts: Vec<Vector2<f64>> = (0..512)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / 512.0;
                    Vector2::new(2.0 * th.cos(), th.sin())
                })
                .collect();
            let c = crate::contour::validate_and_normalize(&pts, "el").unwrap();
            crate::contour::to_srvf(&c, 128).unwrap()
        };
        let path = geodesic(&q1, &q2, K, TOL, ITERS).unwrap();
        let v = inverse_exp(&q1, &q2, K, TOL, ITERS).unwrap();
        assert!((v.norm() - path.length).abs() < 1e-3);
    }

    #[test]
    fn antipodal_pair_is_rejected() {
        let q = synthetic::random_srvf(23, 128).unwrap();
        let neg = Srvf::from_samples_unchecked(
            q.samples().iter().map(|s| -s).collect(),
            q.scale(),
        );
        assert!(matches!(
            inverse_exp(&q, &neg, K, TOL, ITERS),
            Err(Error::AntipodalPair { .. })
        ));
    }

    #[test]
    fn geodesic_between_identical_points_is_flat() {
        let q = synthetic::random_srvf(29, 128).unwrap();
        let path = geodesic(&q, &q, K, TOL, ITERS).unwrap();
        assert_eq!(path.length, 0.0);
        assert!(path.converged);
        for w in &path.waypoints {
            assert_eq!(w.samples(), q.samples());
        }
    }

    #[test]
    fn geodesic_properties_on_random_pairs() {
        for seed in [1u64, 2, 3] {
            let q1 = synthetic::random_srvf(100 + seed, 128).unwrap();
            let q2 = synthetic::random_srvf(200 + seed, 128).unwrap();
            let path = geodesic(&q1, &q2, K, TOL, ITERS).unwrap();

            // Endpoints intact.
            assert_eq!(path.waypoints[0].samples(), q1.samples());
            assert_eq!(path.waypoints[K - 1].samples(), q2.samples());

            // Energy is monotone non-increasing.
            for w in path.energy_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }

            // Every waypoint satisfies the pre-shape invariants.
            for w in &path.waypoints {
                assert!((w.norm() - 1.0).abs() < NORM_TOL);
                assert!(w.closure_residual().norm() < CLOSURE_TOL);
            }

            // Length dominates the sphere bound and is within a small gap of
            // it for smooth shapes.
            let bound = q1.sphere_distance(&q2);
            assert!(path.length >= bound - 1e-6);
            assert!(path.length <= 1.02 * bound + 1e-6, "length {} vs bound {}", path.length, bound);

            // Constant-speed segments after convergence.
            let segs: Vec<f64> = path
                .waypoints
                .windows(2)
                .map(|w| w[0].sphere_distance(&w[1]))
                .collect();
            let mean = segs.iter().sum::<f64>() / segs.len() as f64;
            for s in segs {
                assert!((s - mean).abs() <= 0.05 * mean, "segment {s} vs mean {mean}");
            }
        }
    }

    #[test]
    fn straightening_shortens_the_initial_path() {
        let q1 = synthetic::random_srvf(41, 96).unwrap();
        let q2 = synthetic::random_srvf(42, 96).unwrap();
        let init = initial_path(&q1, &q2, K).unwrap();
        let init_len = GeodesicPath::measure_length(&init);
        let path = geodesic(&q1, &q2, K, TOL, ITERS).unwrap();
        assert!(path.length <= init_len + 1e-9);
    }

    #[test]
    fn preshape_distance_is_symmetric_and_definite() {
        let q1 = synthetic::random_srvf(51, 96).unwrap();
        let q2 = synthetic::random_srvf(52, 96).unwrap();
        let d12 = distance_preshape(&q1, &q2, K, TOL, ITERS).unwrap();
        let d21 = distance_preshape(&q2, &q1, K, TOL, ITERS).unwrap();
        assert!(d12 >= 0.0);
        assert!((d12 - d21).abs() < 1e-3);
        let dqq = distance_preshape(&q1, &q1, K, TOL, ITERS).unwrap();
        assert!(dqq < 1e-6);
    }

    #[test]
    fn triangle_inequality_holds_with_slack() {
        let qs: Vec<Srvf> = (0..3)
            .map(|i| synthetic::random_srvf(60 + i, 96).unwrap())
            .collect();
        let d = |a: &Srvf, b: &Srvf| distance_preshape(a, b, K, TOL, ITERS).unwrap();
        let (dab, dbc, dac) = (d(&qs[0], &qs[1]), d(&qs[1], &qs[2]), d(&qs[0], &qs[2]));
        assert!(dac <= dab + dbc + 5e-3);
    }

    #[test]
    fn plus_minus_t_are_equidistant() {
        let q = synthetic::random_srvf(71, 128).unwrap();
        let w: Vec<Vector2<f64>> = synthetic::random_srvf(72, 128).unwrap().samples().to_vec();
        let v = project_tangent(&q, &w);
        let v = v.scaled(0.2 / v.norm());
        let plus = exp_map(&q, &v).unwrap();
        let minus = exp_map(&q, &v.scaled(-1.0)).unwrap();
        let dp = distance_preshape(&q, &plus, K, TOL, ITERS).unwrap();
        let dm = distance_preshape(&q, &minus, K, TOL, ITERS).unwrap();
        assert_relative_eq!(dp, dm, epsilon = 5e-3);
    }
}
