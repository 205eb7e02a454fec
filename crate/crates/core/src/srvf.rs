//! The square-root velocity representation of a closed planar curve.
//!
//! A curve `beta` on the circle maps to `q(t) = beta'(t) / sqrt(|beta'(t)|)`.
//! We discretize the parameter domain as m uniform samples on [0,1) with
//! periodic indexing; integrals are periodic trapezoid sums, which on a
//! uniform periodic grid reduce to `(1/m) * sum`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Discretized SRVF of a unit-length closed curve.
///
/// After projection to the pre-shape space (see [`crate::preshape`]) the
/// samples satisfy the unit-norm and closure invariants:
/// `∫|q|² dt = 1` and `∫ q|q| dt = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srvf {
    samples: Vec<Vector2<f64>>,
    /// Length of the original curve, recorded before unit-length rescaling
    /// so size can be analyzed separately from shape.
    scale: f64,
}

impl Srvf {
    /// Wrap raw samples without any feasibility check. Callers that need the
    /// pre-shape invariants should go through `preshape::project_closure`.
    pub fn from_samples_unchecked(samples: Vec<Vector2<f64>>, scale: f64) -> Self {
        Srvf { samples, scale }
    }

    pub fn samples(&self) -> &[Vector2<f64>] {
        &self.samples
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// L² inner product `∫ <q1(t), q2(t)> dt` on the periodic grid.
    pub fn inner(&self, other: &Srvf) -> f64 {
        inner(&self.samples, &other.samples)
    }

    /// L² norm.
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Closure residual `∫ q(t)|q(t)| dt`; zero for closed curves.
    pub fn closure_residual(&self) -> Vector2<f64> {
        let m = self.m() as f64;
        let mut acc = Vector2::zeros();
        for q in &self.samples {
            acc += q * q.norm();
        }
        acc / m
    }

    /// Great-circle distance on the unit Hilbert sphere containing the
    /// pre-shape space; a lower bound for the pre-shape geodesic distance.
    pub fn sphere_distance(&self, other: &Srvf) -> f64 {
        self.inner(other).clamp(-1.0, 1.0).acos()
    }

    /// Samples rotated so that parameterization starts `shift` grid points
    /// later: `out[i] = q[(i + shift) mod m]`.
    pub fn seed_shifted(&self, shift: usize) -> Srvf {
        let m = self.m();
        let s = shift % m;
        let mut samples = Vec::with_capacity(m);
        samples.extend_from_slice(&self.samples[s..]);
        samples.extend_from_slice(&self.samples[..s]);
        Srvf {
            samples,
            scale: self.scale,
        }
    }

    /// Apply a rotation matrix to every sample.
    pub fn rotated(&self, rot: &nalgebra::Matrix2<f64>) -> Srvf {
        Srvf {
            samples: self.samples.iter().map(|q| rot * q).collect(),
            scale: self.scale,
        }
    }

    /// Linear interpolation at fractional parameter `t` (periodic in [0,1)).
    pub fn interp(&self, t: f64) -> Vector2<f64> {
        let m = self.m();
        let pos = (t.rem_euclid(1.0)) * m as f64;
        let i = pos.floor() as usize % m;
        let frac = pos - pos.floor();
        let a = self.samples[i];
        let b = self.samples[(i + 1) % m];
        a + (b - a) * frac
    }
}

/// Periodic-trapezoid L² inner product of two sample fields.
pub fn inner(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let m = a.len() as f64;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x.dot(y);
    }
    acc / m
}

/// L² norm of a sample field.
pub fn norm(a: &[Vector2<f64>]) -> f64 {
    inner(a, a).sqrt()
}
