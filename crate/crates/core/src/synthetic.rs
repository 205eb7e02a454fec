//! Synthetic closed-curve generators used by tests, demos and calibration
//! studies: smooth Fourier blobs, star polygons and peaked outlines that
//! mimic protrusion-type contours.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::contour::{validate_and_normalize, Contour, CurveSpeedAngle};
use crate::error::Result;
use crate::srvf::Srvf;

/// Smooth random closed curve: radius 1 plus a random low-order Fourier
/// perturbation, sampled uniformly in angle.
pub fn fourier_loop(seed: u64, harmonics: usize, amplitude: f64, n_points: usize) -> Contour {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..harmonics)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let phase: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            (a, phase)
        })
        .collect();
    let pts: Vec<Vector2<f64>> = (0..n_points)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n_points as f64;
            let mut r = 1.0;
            for (k, (a, phase)) in coeffs.iter().enumerate() {
                r += amplitude * a * ((k as f64 + 2.0) * th + phase).cos();
            }
            let r = r.max(0.15);
            Vector2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    validate_and_normalize(&pts, &format!("fourier-{seed}")).expect("generator produces valid contours")
}

/// Star-shaped polygon with jittered spike radii.
pub fn star_polygon(spikes: usize, outer: f64, inner: f64, seed: u64) -> Contour {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spikes * 2;
    let pts: Vec<Vector2<f64>> = (0..n)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let base = if i % 2 == 0 { outer } else { inner };
            let r = base * (1.0 + 0.1 * rng.gen_range(-1.0..1.0));
            Vector2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    validate_and_normalize(&pts, &format!("star-{spikes}-{seed}"))
        .expect("generator produces valid contours")
}

/// Closed outline with `peaks` protruding bumps of the given amplitude;
/// `sharpness` controls how localized the bumps are (larger = narrower).
pub fn peaked_loop(peaks: usize, amplitude: f64, sharpness: f64, n_points: usize) -> Contour {
    let pts: Vec<Vector2<f64>> = (0..n_points)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n_points as f64;
            let mut r = 1.0;
            for k in 0..peaks {
                let center = 2.0 * std::f64::consts::PI * k as f64 / peaks as f64;
                r += amplitude * (sharpness * ((th - center).cos() - 1.0)).exp();
            }
            Vector2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    validate_and_normalize(&pts, &format!("peaked-{peaks}"))
        .expect("generator produces valid contours")
}

/// Circle of the given circumference sampled at n points.
pub fn circle(circumference: f64, n_points: usize) -> Contour {
    let radius = circumference / (2.0 * std::f64::consts::PI);
    let pts: Vec<Vector2<f64>> = (0..n_points)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n_points as f64;
            Vector2::new(radius * th.cos(), radius * th.sin())
        })
        .collect();
    validate_and_normalize(&pts, "circle").expect("circle is a valid contour")
}

/// Pre-shape SRVF of a random smooth blob at m samples. Below the
/// arc-length resampling minimum the loop is sampled directly at m points.
pub fn random_srvf(seed: u64, m: usize) -> Result<Srvf> {
    let c = if m < 32 {
        fourier_loop(seed, 4, 0.18, m)
    } else {
        fourier_loop(seed, 4, 0.18, (4 * m).max(256))
    };
    crate::contour::to_srvf(&c, m)
}

/// Smooth random perturbation of a speed/angle curve: a Fourier bump in the
/// speed and a pointwise-orthogonal rotation field for the angle, so the
/// tangency precondition of the elastic metric holds by construction.
pub fn tangent_perturbation(
    base: &CurveSpeedAngle,
    seed: u64,
) -> (Vec<f64>, Vec<Vector2<f64>>) {
    let m = base.speed.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|k| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            ((k + 1) as f64, a, b)
        })
        .collect();
    let field = |t: f64, which: usize| -> f64 {
        let mut v = 0.0;
        for (k, a, b) in &modes {
            let ang = 2.0 * std::f64::consts::PI * k * t;
            v += if which == 0 { a * ang.cos() } else { b * ang.sin() };
        }
        v
    };
    let dp: Vec<f64> = (0..m)
        .map(|i| 0.1 * field(i as f64 / m as f64, 0))
        .collect();
    let dth: Vec<Vector2<f64>> = (0..m)
        .map(|i| {
            let c = 0.1 * field(i as f64 / m as f64, 1);
            let th = base.angle[i];
            Vector2::new(-th.y, th.x) * c
        })
        .collect();
    (dp, dth)
}

/// Reparameterized copy of a pre-shape, projected back onto the pre-shape
/// space (the discrete warp action loses a little norm and closure).
pub fn warped_preshape(q: &Srvf, warp: &[f64]) -> Result<Srvf> {
    let warped = crate::registration::reparam_action(q, warp)?;
    Ok(crate::preshape::project_closure(warped.samples())?.with_scale(q.scale()))
}

/// Random monotone lattice warp from (0,0) to (m,m) using the given DP steps,
/// returned as m+1 nondecreasing knot values with endpoints 0 and 1.
pub fn random_lattice_warp(m: usize, steps: &[(usize, usize)], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_slope = steps
        .iter()
        .map(|&(di, dj)| dj as f64 / di as f64)
        .fold(0.0_f64, f64::max);
    let min_slope = 1.0 / max_slope;
    let mut knots = vec![0.0f64; m + 1];
    let (mut i, mut j) = (0usize, 0usize);
    while i < m {
        let feasible: Vec<(usize, usize)> = steps
            .iter()
            .copied()
            .filter(|&(di, dj)| {
                if i + di > m || j + dj > m {
                    return false;
                }
                let ri = (m - i - di) as f64;
                let rj = (m - j - dj) as f64;
                if ri == 0.0 {
                    return rj == 0.0;
                }
                rj / ri >= min_slope - 1e-12 && rj / ri <= max_slope + 1e-12
            })
            .collect();
        let &(di, dj) = feasible
            .get(rng.gen_range(0..feasible.len()))
            .expect("lattice warp always has a feasible step");
        let slope = dj as f64 / di as f64;
        for a in 1..=di {
            knots[i + a] = (j as f64 + slope * a as f64) / m as f64;
        }
        i += di;
        j += dj;
    }
    knots[m] = 1.0;
    knots
}
