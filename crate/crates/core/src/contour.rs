//! Closed planar contours: validation, arc-length resampling and conversion
//! to and from the SRVF representation.
//!
//! A [`Contour`] is an ordered closed polyline; the first point is not
//! repeated at the end, closure is implicit. Validation enforces
//! counter-clockwise orientation so that all curves share the orientation
//! expected by the reparameterization group.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preshape;
use crate::srvf::Srvf;

/// Minimum number of distinct points a contour must have.
pub const MIN_POINTS: usize = 8;

/// An ordered, implicitly closed, counter-clockwise polyline in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<Vector2<f64>>,
    id: String,
}

/// Speed and unit-tangent decomposition of a contour's derivative:
/// `beta'(t) = p(t) * theta(t)` with `p > 0` and `|theta| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpeedAngle {
    pub speed: Vec<f64>,
    pub angle: Vec<Vector2<f64>>,
}

impl Contour {
    /// Construct without validation; for internal use where the invariants
    /// are established by the caller (e.g. SRVF integration).
    pub(crate) fn from_points_unchecked(points: Vec<Vector2<f64>>, id: impl Into<String>) -> Self {
        Contour {
            points,
            id: id.into(),
        }
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Perimeter of the closed polyline.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| (self.points[(i + 1) % n] - self.points[i]).norm())
            .sum()
    }

    /// Signed polygon area; positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }
}

fn signed_area(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Validate a raw point sequence and normalize it into a [`Contour`].
///
/// Removes consecutive duplicates (and a duplicated closing point), requires
/// at least [`MIN_POINTS`] distinct points and nonzero enclosed area, and
/// reverses the point order if the input is clockwise. Translation is left
/// untouched; the SRVF representation is translation invariant anyway.
pub fn validate_and_normalize(raw_points: &[Vector2<f64>], id: &str) -> Result<Contour> {
    let mut pts: Vec<Vector2<f64>> = Vec::with_capacity(raw_points.len());
    for &p in raw_points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::DegenerateContour(format!(
                "non-finite coordinate in contour '{id}'"
            )));
        }
        if pts.last().map_or(true, |last| (p - last).norm() > 1e-12) {
            pts.push(p);
        }
    }
    // Closure is implicit: drop a duplicated closing point.
    while pts.len() > 1 && (pts[0] - *pts.last().unwrap()).norm() <= 1e-12 {
        pts.pop();
    }
    if pts.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            got: pts.len(),
            min: MIN_POINTS,
        });
    }
    let area = signed_area(&pts);
    let perim: f64 = (0..pts.len())
        .map(|i| (pts[(i + 1) % pts.len()] - pts[i]).norm())
        .sum();
    if area.abs() <= 1e-12 * perim.powi(2).max(1.0) {
        return Err(Error::DegenerateContour(format!(
            "contour '{id}' has zero enclosed area"
        )));
    }
    if area < 0.0 {
        // Reverse to counter-clockwise, keeping the first point first.
        pts[1..].reverse();
    }
    Ok(Contour {
        points: pts,
        id: id.to_string(),
    })
}

/// Resample a contour to `m` points equally spaced by arc length.
///
/// Positions are obtained by inverting the cumulative chord-length table of
/// the closed polyline. An m-point input whose cumulative arc positions are
/// already within one gap of uniform is treated as arc-length parameterized
/// and returned unchanged: redistribution would move points by less than the
/// sampling resolution, and the no-op makes resampling idempotent.
pub fn resample_arclength(c: &Contour, m: usize) -> Result<Contour> {
    if m < 32 {
        return Err(Error::InvalidConfig(format!(
            "resample target m = {m} is below 32"
        )));
    }
    let n = c.points.len();
    let total = c.perimeter();
    if !(total > 0.0) {
        return Err(Error::DegenerateContour(format!(
            "contour '{}' has zero perimeter",
            c.id
        )));
    }
    if n == m {
        let gap = total / m as f64;
        let mut cum = 0.0;
        let mut max_dev = 0.0_f64;
        for k in 0..n {
            cum += (c.points[(k + 1) % n] - c.points[k]).norm();
            max_dev = max_dev.max((cum - gap * (k + 1) as f64).abs());
        }
        if max_dev <= gap {
            return Ok(c.clone());
        }
    }

    // Cumulative arc positions of the polyline vertices, cum[0] = 0,
    // cum[n] = total.
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for i in 0..n {
        let seg = (c.points[(i + 1) % n] - c.points[i]).norm();
        cum.push(cum[i] + seg);
    }

    let mut out = Vec::with_capacity(m);
    let mut seg = 0usize;
    for k in 0..m {
        let s = total * k as f64 / m as f64;
        while seg + 1 < n && cum[seg + 1] < s {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let frac = if seg_len > 0.0 {
            (s - cum[seg]) / seg_len
        } else {
            0.0
        };
        let a = c.points[seg];
        let b = c.points[(seg + 1) % n];
        out.push(a + (b - a) * frac);
    }
    Ok(Contour {
        points: out,
        id: c.id.clone(),
    })
}

/// Central-difference derivative on the periodic grid with spacing 1/m.
fn central_derivative(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let m = points.len();
    let h2 = m as f64 / 2.0;
    (0..m)
        .map(|i| (points[(i + 1) % m] - points[(i + m - 1) % m]) * h2)
        .collect()
}

/// Convert a contour to its SRVF at `m` samples.
///
/// The curve is rescaled to unit length first (the original perimeter is
/// recorded in the `scale` field), the derivative is estimated by central
/// differences on the periodic grid, and the result is projected to the
/// pre-shape space so the unit-norm and closure invariants hold. A contour
/// that does not already have `m` points is resampled by arc length.
pub fn to_srvf(c: &Contour, m: usize) -> Result<Srvf> {
    let resampled;
    let work = if c.len() == m {
        c
    } else {
        resampled = resample_arclength(c, m)?;
        &resampled
    };
    let perimeter = work.perimeter();
    if !(perimeter > 0.0) {
        return Err(Error::DegenerateContour(format!(
            "contour '{}' has zero perimeter",
            c.id
        )));
    }
    let unit: Vec<Vector2<f64>> = work.points.iter().map(|p| p / perimeter).collect();
    let deriv = central_derivative(&unit);
    let mut samples = Vec::with_capacity(m);
    for d in &deriv {
        let mag = d.norm();
        if mag < 1e-12 {
            return Err(Error::DegenerateContour(format!(
                "vanishing derivative in contour '{}'",
                c.id
            )));
        }
        samples.push(d / mag.sqrt());
    }
    let projected = preshape::project_closure(&samples)?;
    Ok(projected.with_scale(perimeter))
}

/// Integrate an SRVF back to a contour starting at `base_point`.
///
/// Returns the contour and the endpoint gap (the closure defect of the
/// integrated curve, which is small whenever the SRVF closure residual is).
pub fn from_srvf(q: &Srvf, base_point: Vector2<f64>) -> (Contour, f64) {
    let m = q.m();
    let h = 1.0 / m as f64;
    let speed: Vec<Vector2<f64>> = q.samples().iter().map(|s| s * s.norm()).collect();
    let mut pts = Vec::with_capacity(m);
    let mut acc = base_point;
    pts.push(acc);
    for i in 0..m - 1 {
        acc += (speed[i] + speed[i + 1]) * (0.5 * h);
        pts.push(acc);
    }
    let end = acc + (speed[m - 1] + speed[0]) * (0.5 * h);
    let gap = (end - base_point).norm();
    (Contour::from_points_unchecked(pts, ""), gap)
}

/// Decompose the contour derivative into speed and unit-direction fields,
/// evaluated on the contour's own parameter grid (index / point count).
pub fn speed_angle(c: &Contour) -> Result<CurveSpeedAngle> {
    let deriv = central_derivative(&c.points);
    let mut speed = Vec::with_capacity(deriv.len());
    let mut angle = Vec::with_capacity(deriv.len());
    for d in &deriv {
        let mag = d.norm();
        if mag < 1e-12 {
            return Err(Error::DegenerateContour(format!(
                "vanishing derivative in contour '{}'",
                c.id
            )));
        }
        speed.push(mag);
        angle.push(d / mag);
    }
    Ok(CurveSpeedAngle { speed, angle })
}

/// Evaluate the elastic metric (weights a = 1/4, b = 1) on two perturbations
/// of a curve given in speed/angle coordinates, together with the L² inner
/// product of the chain-rule-mapped SRVF perturbations.
///
/// With `q = sqrt(p) * theta`, a perturbation `(dp, dtheta)` maps to
/// `dq = dp/(2 sqrt(p)) * theta + sqrt(p) * dtheta`; the elastic metric with
/// these weights equals the L² product of the mapped perturbations, so the
/// two returned values agree up to quadrature.
pub fn elastic_metric_check(
    base: &CurveSpeedAngle,
    pert1: (&[f64], &[Vector2<f64>]),
    pert2: (&[f64], &[Vector2<f64>]),
) -> Result<(f64, f64)> {
    let m = base.speed.len();
    for pert in [&pert1, &pert2] {
        if pert.0.len() != m || pert.1.len() != m {
            return Err(Error::SampleCountMismatch {
                left: m,
                right: pert.0.len().max(pert.1.len()),
            });
        }
        let max_dot = base
            .angle
            .iter()
            .zip(pert.1)
            .map(|(th, dth)| th.dot(dth).abs())
            .fold(0.0_f64, f64::max);
        if max_dot > 1e-6 {
            return Err(Error::NonTangentPerturbation { max_dot });
        }
    }

    let inv_m = 1.0 / m as f64;
    let mut elastic = 0.0;
    let mut l2 = 0.0;
    for i in 0..m {
        let p = base.speed[i];
        let th = base.angle[i];
        let (dp1, dth1) = (pert1.0[i], pert1.1[i]);
        let (dp2, dth2) = (pert2.0[i], pert2.1[i]);
        elastic += 0.25 * dp1 * dp2 / p + p * dth1.dot(&dth2);
        let sp = p.sqrt();
        let dq1 = th * (dp1 / (2.0 * sp)) + dth1 * sp;
        let dq2 = th * (dp2 / (2.0 * sp)) + dth2 * sp;
        l2 += dq1.dot(&dq2);
    }
    Ok((elastic * inv_m, l2 * inv_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use approx::assert_relative_eq;

    fn circle_points(n: usize, radius: f64, ccw: bool) -> Vec<Vector2<f64>> {
        (0..n)
            .map(|i| {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let ang = if ccw { ang } else { -ang };
                Vector2::new(radius * ang.cos(), radius * ang.sin())
            })
            .collect()
    }

    #[test]
    fn square_with_repeated_corner_is_too_few_points() {
        let pts = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
        ];
        match validate_and_normalize(&pts, "sq") {
            Err(Error::TooFewPoints { got: 4, min }) => assert_eq!(min, MIN_POINTS),
            other => panic!("expected TooFewPoints, got {other:?}"),
        }
    }

    #[test]
    fn clockwise_circle_is_reversed_to_ccw() {
        let pts = circle_points(100, 1.0, false);
        let c = validate_and_normalize(&pts, "cw").unwrap();
        assert!(c.signed_area() > 0.0);
        assert_eq!(c.points()[0], pts[0]);
        // Same point set, reversed traversal.
        assert_eq!(c.points()[1], pts[99]);
    }

    #[test]
    fn ccw_ellipse_is_unchanged() {
        let pts: Vec<Vector2<f64>> = (0..64)
            .map(|i| {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                Vector2::new(2.0 * ang.cos(), ang.sin())
            })
            .collect();
        let c = validate_and_normalize(&pts, "el").unwrap();
        assert_eq!(c.points(), &pts[..]);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Vector2<f64>> = (0..12).map(|i| Vector2::new(i as f64, 0.0)).collect();
        assert!(matches!(
            validate_and_normalize(&pts, "line"),
            Err(Error::DegenerateContour(_))
        ));
    }

    #[test]
    fn resampled_circle_has_equal_chords() {
        let c = validate_and_normalize(&circle_points(4000, 1.0, true), "c").unwrap();
        let r = resample_arclength(&c, 128).unwrap();
        assert_eq!(r.len(), 128);
        let chords: Vec<f64> = (0..128)
            .map(|i| (r.points()[(i + 1) % 128] - r.points()[i]).norm())
            .collect();
        let mean = chords.iter().sum::<f64>() / 128.0;
        for ch in &chords {
            assert_relative_eq!(*ch, mean, max_relative = 1e-6);
        }
    }

    #[test]
    fn rectangle_resample_gaps_are_exact() {
        // 1 x 2 rectangle, perimeter 6, m = 60 -> every arc gap is 0.1 and all
        // corners land exactly on sample points.
        let raw = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(2.0, 0.0),
            Vector2::new(2.0, 1.0),
            Vector2::new(0.0, 1.0),
        ];
        // Densify the rectangle edges so validation passes the minimum count.
        let mut pts = Vec::new();
        for i in 0..4 {
            let a = raw[i];
            let b = raw[(i + 1) % 4];
            for k in 0..10 {
                pts.push(a + (b - a) * (k as f64 / 10.0));
            }
        }
        let c = validate_and_normalize(&pts, "rect").unwrap();
        let r = resample_arclength(&c, 60).unwrap();
        // Arc positions along the rectangle boundary advance by exactly 0.1;
        // with corners on multiples of 0.1 every chord is a straight piece.
        let mut perim = 0.0;
        for i in 0..60 {
            let gap = (r.points()[(i + 1) % 60] - r.points()[i]).norm();
            assert_relative_eq!(gap, 0.1, epsilon = 1e-9);
            perim += gap;
        }
        assert_relative_eq!(perim, 6.0, epsilon = 1e-9);
    }

    /// Brute-force oracle: dense piecewise-linear arc-length table inversion.
    fn dense_resample_oracle(c: &Contour, m: usize) -> Vec<Vector2<f64>> {
        let n = c.len();
        let dense_per_seg = 2000;
        let mut positions = vec![Vector2::zeros(); 0];
        let mut arcs = vec![0.0];
        let mut acc = 0.0;
        for i in 0..n {
            let a = c.points()[i];
            let b = c.points()[(i + 1) % n];
            for k in 0..dense_per_seg {
                let p0 = a + (b - a) * (k as f64 / dense_per_seg as f64);
                let p1 = a + (b - a) * ((k + 1) as f64 / dense_per_seg as f64);
                positions.push(p0);
                acc += (p1 - p0).norm();
                arcs.push(acc);
            }
        }
        let total = acc;
        let mut out = Vec::with_capacity(m);
        let mut idx = 0usize;
        for k in 0..m {
            let s = total * k as f64 / m as f64;
            while idx + 1 < arcs.len() - 1 && arcs[idx + 1] < s {
                idx += 1;
            }
            let seg = arcs[idx + 1] - arcs[idx];
            let frac = if seg > 0.0 { (s - arcs[idx]) / seg } else { 0.0 };
            let a = positions[idx];
            let b = positions[(idx + 1) % positions.len()];
            out.push(a + (b - a) * frac);
        }
        out
    }

    #[test]
    fn star_resample_matches_dense_inversion_oracle() {
        let c = synthetic::star_polygon(7, 1.0, 0.55, 777);
        let r = resample_arclength(&c, 256).unwrap();
        let oracle = dense_resample_oracle(&c, 256);
        let total = c.perimeter();
        for (got, want) in r.points().iter().zip(&oracle) {
            assert!((got - want).norm() < 1e-6 * total);
        }
        // Every sample sits on the source polyline.
        let on_polyline = |p: &Vector2<f64>| -> f64 {
            let n = c.len();
            (0..n)
                .map(|i| {
                    let a = c.points()[i];
                    let b = c.points()[(i + 1) % n];
                    let ab = b - a;
                    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                    (p - (a + ab * t)).norm()
                })
                .fold(f64::INFINITY, f64::min)
        };
        for p in r.points() {
            assert!(on_polyline(p) < 1e-9 * total);
        }
    }

    #[test]
    fn resample_is_idempotent() {
        for c in [
            validate_and_normalize(&circle_points(500, 2.0, true), "c").unwrap(),
            synthetic::fourier_loop(11, 4, 0.15, 400),
        ] {
            let once = resample_arclength(&c, 128).unwrap();
            let twice = resample_arclength(&once, 128).unwrap();
            for (a, b) in once.points().iter().zip(twice.points()) {
                assert!((a - b).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn unit_circle_srvf_is_unit_tangents() {
        let circumference = 1.0;
        let radius = circumference / (2.0 * std::f64::consts::PI);
        let c = validate_and_normalize(&circle_points(128, radius, true), "c").unwrap();
        let q = to_srvf(&c, 128).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-6);
        assert!(q.closure_residual().norm() < 1e-6);
        for (i, s) in q.samples().iter().enumerate() {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / 128.0;
            let tangent = Vector2::new(-ang.sin(), ang.cos());
            assert!((s - tangent).norm() < 2e-3);
        }
    }

    #[test]
    fn srvf_is_scale_invariant_with_scale_recorded() {
        let radius = 1.0 / (2.0 * std::f64::consts::PI);
        let c1 = validate_and_normalize(&circle_points(128, radius, true), "c").unwrap();
        let c5 = validate_and_normalize(&circle_points(128, 5.0 * radius, true), "c5").unwrap();
        let q1 = to_srvf(&c1, 128).unwrap();
        let q5 = to_srvf(&c5, 128).unwrap();
        for (a, b) in q1.samples().iter().zip(q5.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        // Scale records the original polygon perimeter.
        assert_relative_eq!(q5.scale(), c5.perimeter(), max_relative = 1e-9);
        assert_relative_eq!(q5.scale() / q1.scale(), 5.0, max_relative = 1e-9);
    }

    #[test]
    fn srvf_is_translation_invariant() {
        let c = synthetic::fourier_loop(5, 4, 0.2, 128);
        let shifted: Vec<Vector2<f64>> = c
            .points()
            .iter()
            .map(|p| p + Vector2::new(17.5, -3.25))
            .collect();
        let cs = validate_and_normalize(&shifted, "shift").unwrap();
        let q = to_srvf(&c, 128).unwrap();
        let qs = to_srvf(&cs, 128).unwrap();
        for (a, b) in q.samples().iter().zip(qs.samples()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn ellipse_srvf_matches_analytic_derivative() {
        // Uniform-angle ellipse sampled at exactly m points: to_srvf uses the
        // native parameterization, so the closed-form derivative applies.
        let m = 256;
        let (a, b) = (2.0, 1.0);
        let pts: Vec<Vector2<f64>> = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                Vector2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        let c = validate_and_normalize(&pts, "ellipse").unwrap();
        let perimeter = c.perimeter();
        let q = to_srvf(&c, m).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-6);
        assert!(q.closure_residual().norm() < 1e-6);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut err2 = 0.0;
        for (i, s) in q.samples().iter().enumerate() {
            let th = two_pi * i as f64 / m as f64;
            // Unit-length curve: beta(t) = ellipse(2 pi t) / perimeter.
            let deriv = Vector2::new(-a * th.sin(), b * th.cos()) * (two_pi / perimeter);
            let oracle = deriv / deriv.norm().sqrt();
            err2 += (s - oracle).norm_squared();
        }
        let l2_err = (err2 / m as f64).sqrt();
        assert!(l2_err < 2e-3, "L2 error {l2_err}");
    }

    #[test]
    fn from_srvf_round_trips() {
        let radius = 1.0 / (2.0 * std::f64::consts::PI);
        let c = validate_and_normalize(&circle_points(128, radius, true), "c").unwrap();
        let q = to_srvf(&c, 128).unwrap();
        let (back, gap) = from_srvf(&q, Vector2::new(0.3, -0.2));
        assert!(gap < 1e-6, "endpoint gap {gap}");
        assert_eq!(back.len(), 128);

        // Differentiate-then-integrate consistency is second order in the
        // grid spacing, so the budget needs smooth curves at these m.
        for m in [128usize, 256] {
            let blob = synthetic::fourier_loop(7, 2, 0.06, 4 * m);
            let blob = resample_arclength(&blob, m).unwrap();
            let q = to_srvf(&blob, m).unwrap();
            let (curve, _gap) = from_srvf(&q, Vector2::zeros());
            let q2 = to_srvf(&curve, m).unwrap();
            let diff: Vec<Vector2<f64>> = q
                .samples()
                .iter()
                .zip(q2.samples())
                .map(|(a, b)| a - b)
                .collect();
            let err = crate::srvf::norm(&diff);
            assert!(err < 1e-3, "round-trip L2 error {err} at m={m}");
        }
    }

    #[test]
    fn speed_of_arclength_curve_is_constant() {
        // Central differences on a circle give |beta'| = sinc-corrected
        // constant; at m = 4096 the deviation is below 1e-6.
        let m = 4096;
        let radius = 1.0 / (2.0 * std::f64::consts::PI);
        let c = validate_and_normalize(&circle_points(m, radius, true), "c").unwrap();
        let sa = speed_angle(&c).unwrap();
        for p in &sa.speed {
            assert!((p - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn circle_angle_winds_once() {
        let c = validate_and_normalize(&circle_points(256, 1.0, true), "c").unwrap();
        let sa = speed_angle(&c).unwrap();
        let mut winding = 0.0;
        for i in 0..256 {
            let a = sa.angle[i];
            let b = sa.angle[(i + 1) % 256];
            let cross = a.x * b.y - a.y * b.x;
            winding += cross.atan2(a.dot(&b));
        }
        assert_relative_eq!(winding, 2.0 * std::f64::consts::PI, max_relative = 1e-6);
    }

    #[test]
    fn nonuniform_ellipse_speed_matches_closed_form() {
        let m = 512;
        let (a, b) = (2.0, 1.0);
        let pts: Vec<Vector2<f64>> = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                Vector2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        let c = validate_and_normalize(&pts, "el").unwrap();
        let sa = speed_angle(&c).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        for (i, p) in sa.speed.iter().enumerate() {
            let th = two_pi * i as f64 / m as f64;
            let truth = two_pi * ((a * th.sin()).powi(2) + (b * th.cos()).powi(2)).sqrt();
            assert_relative_eq!(*p, truth, max_relative = 2e-3);
        }
    }

    #[test]
    fn elastic_metric_zero_perturbations() {
        let c = synthetic::fourier_loop(3, 3, 0.1, 128);
        let sa = speed_angle(&c).unwrap();
        let zero_p = vec![0.0; 128];
        let zero_th = vec![Vector2::zeros(); 128];
        let (e, l2) =
            elastic_metric_check(&sa, (&zero_p, &zero_th), (&zero_p, &zero_th)).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(l2, 0.0);
    }

    #[test]
    fn elastic_metric_equals_srvf_inner_product() {
        let c = synthetic::fourier_loop(9, 4, 0.15, 256);
        let sa = speed_angle(&c).unwrap();
        let (dp, dth) = synthetic::tangent_perturbation(&sa, 31);
        let (e, l2) = elastic_metric_check(&sa, (&dp, &dth), (&dp, &dth)).unwrap();
        assert!(e > 0.0);
        assert!(l2 > 0.0);
        assert_relative_eq!(e, l2, max_relative = 1e-4);
    }

    #[test]
    fn elastic_metric_constant_speed_bump_on_circle() {
        // Length-1 circle at fine m: p ~ 1, delta p constant c, delta theta 0
        // gives elastic value (1/4) c^2 * int(1/p) ~ (1/4) c^2.
        let m = 1024;
        let radius = 1.0 / (2.0 * std::f64::consts::PI);
        let pts: Vec<Vector2<f64>> = (0..m)
            .map(|i| {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                Vector2::new(radius * ang.cos(), radius * ang.sin())
            })
            .collect();
        let c = validate_and_normalize(&pts, "c").unwrap();
        let sa = speed_angle(&c).unwrap();
        let dp = vec![0.01; m];
        let dth = vec![Vector2::zeros(); m];
        let (e, _) = elastic_metric_check(&sa, (&dp, &dth), (&dp, &dth)).unwrap();
        assert_relative_eq!(e, 0.25 * 0.01 * 0.01, max_relative = 1e-3);
    }

    #[test]
    fn non_tangent_perturbation_is_rejected() {
        let c = synthetic::fourier_loop(3, 3, 0.1, 128);
        let sa = speed_angle(&c).unwrap();
        let dp = vec![0.0; 128];
        let dth: Vec<Vector2<f64>> = sa.angle.clone(); // parallel, not tangent
        assert!(matches!(
            elastic_metric_check(&sa, (&dp, &dth), (&dp, &dth)),
            Err(Error::NonTangentPerturbation { .. })
        ));
    }
}
