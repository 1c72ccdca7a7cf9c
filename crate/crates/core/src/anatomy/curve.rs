use nalgebra::{Point3, Unit, Vector3};

use super::AnatomyError;

/// Natural cubic spline through ordered 3D points, parameterized by
/// cumulative chord length.
#[derive(Debug, Clone)]
pub struct SpineCurve {
    control_points: Vec<Point3<f64>>,
    knots: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    second: Vec<Vector3<f64>>,
}

/// Fits the interpolating natural cubic spline.
pub fn fit_spine_curve(centers: &[Point3<f64>]) -> Result<SpineCurve, AnatomyError> {
    let n = centers.len();
    if n < 2 {
        return Err(AnatomyError::TooFewPoints(n));
    }
    let mut knots = Vec::with_capacity(n);
    knots.push(0.0);
    for i in 1..n {
        let h = (centers[i] - centers[i - 1]).norm();
        if !(h > 0.0) {
            return Err(AnatomyError::DuplicatePoints(i - 1, i));
        }
        knots.push(knots[i - 1] + h);
    }

    let mut second = vec![Vector3::zeros(); n];
    if n > 2 {
        // tridiagonal system for interior second derivatives (Thomas algorithm)
        let m = n - 2;
        let h: Vec<f64> = (0..n - 1).map(|i| knots[i + 1] - knots[i]).collect();
        let slope = |i: usize| (centers[i + 1] - centers[i]) / h[i];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![Vector3::zeros(); m];
        for k in 0..m {
            let i = k + 1;
            diag[k] = 2.0 * (h[i - 1] + h[i]);
            upper[k] = h[i];
            rhs[k] = 6.0 * (slope(i) - slope(i - 1));
        }
        for k in 1..m {
            let w = h[k] / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            let prev = rhs[k - 1];
            rhs[k] -= prev * w;
        }
        second[m] = rhs[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            second[k + 1] = (rhs[k] - second[k + 2] * upper[k]) / diag[k];
        }
    }
    Ok(SpineCurve {
        control_points: centers.to_vec(),
        knots,
        second,
    })
}

impl SpineCurve {
    pub fn control_points(&self) -> &[Point3<f64>] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    pub fn evaluate(&self, t: f64) -> Point3<f64> {
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (a, b) = ((t1 - t) / h, (t - t0) / h);
        let (p0, p1) = (self.control_points[i].coords, self.control_points[i + 1].coords);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        Point3::from(p0 * a + p1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0))
    }

    pub fn derivative(&self, t: f64) -> Vector3<f64> {
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (a, b) = ((t1 - t) / h, (t - t0) / h);
        let (p0, p1) = (self.control_points[i].coords, self.control_points[i + 1].coords);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        (p1 - p0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0)
    }

    /// Unit tangent at the `i`-th control point, oriented along the input order.
    pub fn tangent_at_control(&self, i: usize) -> Unit<Vector3<f64>> {
        Unit::new_normalize(self.derivative(self.knots[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_control_points() {
        let pts: Vec<Point3<f64>> = (0..5)
            .map(|i| {
                let t = i as f64;
                Point3::new(t.sin() * 10.0, 3.0 * t, (0.5 * t).cos() * 4.0)
            })
            .collect();
        let curve = fit_spine_curve(&pts).unwrap();
        for (k, p) in curve.knots().iter().zip(&pts) {
            assert!((curve.evaluate(*k) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_give_straight_tangent() {
        let pts: Vec<Point3<f64>> = [0.0, 30.0, 65.0, 95.0, 130.0]
            .iter()
            .map(|&z| Point3::new(0.0, 0.0, z))
            .collect();
        let curve = fit_spine_curve(&pts).unwrap();
        for i in 0..5 {
            let t = curve.tangent_at_control(i);
            assert!((t.into_inner() - Vector3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_arc_tangents_are_perpendicular_to_radius() {
        let radius = 150.0;
        let pts: Vec<Point3<f64>> = (0..5)
            .map(|i| {
                let a = (-30.0 + 15.0 * i as f64).to_radians();
                Point3::new(0.0, radius * a.cos(), radius * a.sin())
            })
            .collect();
        let curve = fit_spine_curve(&pts).unwrap();
        // natural end conditions straighten the curve at both ends, so the
        // end tangents are looser than the interior ones
        for (i, p) in pts.iter().enumerate() {
            let radial = p.coords.normalize();
            let t = curve.tangent_at_control(i);
            let deviation = t.dot(&radial).abs().asin().to_degrees();
            let bound = if i == 0 || i == 4 { 6.0 } else { 2.0 };
            assert!(deviation < bound, "control {i}: {deviation}°");
        }
    }

    #[test]
    fn rejects_single_point_and_duplicates() {
        assert!(matches!(
            fit_spine_curve(&[Point3::origin()]),
            Err(AnatomyError::TooFewPoints(1))
        ));
        assert!(matches!(
            fit_spine_curve(&[Point3::origin(), Point3::origin()]),
            Err(AnatomyError::DuplicatePoints(0, 1))
        ));
    }

    #[test]
    fn two_points_make_a_line() {
        let curve = fit_spine_curve(&[Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 3.0, 4.0)]).unwrap();
        let t = curve.tangent_at_control(1);
        assert!((t.into_inner() - Vector3::new(0.0, 0.6, 0.8)).norm() < 1e-12);
        assert!((curve.evaluate(2.5) - Point3::new(0.0, 1.5, 2.0)).norm() < 1e-12);
    }
}
