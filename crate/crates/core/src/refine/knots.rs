//! Piecewise-linear motion over image rows.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, MotionEstimate, RigConfig};

/// Velocities at knot rows, linearly interpolated in between and held
/// constant outside the first and last knot. At row `v` with time `τ` the
/// camera-1 pose is `X -> exp(τ [ω(v)]_x) X + τ t(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotMotion {
    pub knots: Vec<(f64, Vector3<f64>, Vector3<f64>)>,
}

impl KnotMotion {
    pub fn new(knots: Vec<(f64, Vector3<f64>, Vector3<f64>)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("at least one knot is required".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument("knot rows must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `count` knots spread over `[v_min, v_max]`, all at `init`. Three knots
    /// sit at the ends and at row 0 when 0 lies strictly inside the range.
    pub fn uniform(init: &MotionEstimate, count: usize, v_min: f64, v_max: f64) -> Result<Self> {
        if count == 0 || !(v_max > v_min || count == 1) {
            return Err(Error::InvalidArgument(format!("cannot place {count} knots in [{v_min}, {v_max}]")));
        }
        let rows: Vec<f64> = if count == 1 {
            vec![0.5 * (v_min + v_max)]
        } else if count == 3 && v_min < 0.0 && v_max > 0.0 {
            vec![v_min, 0.0, v_max]
        } else {
            (0..count)
                .map(|k| v_min + (v_max - v_min) * k as f64 / (count - 1) as f64)
                .collect()
        };
        Self::new(rows.into_iter().map(|r| (r, init.omega, init.t)).collect())
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Interpolation weights `(index, weight)` of the two knots bracketing `v`.
    pub fn weights(&self, v: f64) -> [(usize, f64); 2] {
        let n = self.knots.len();
        if n == 1 || v <= self.knots[0].0 {
            return [(0, 1.0), (0, 0.0)];
        }
        if v >= self.knots[n - 1].0 {
            return [(n - 1, 1.0), (n - 1, 0.0)];
        }
        let k = self.knots.partition_point(|kn| kn.0 <= v) - 1;
        let (r0, r1) = (self.knots[k].0, self.knots[k + 1].0);
        let a = (v - r0) / (r1 - r0);
        [(k, 1.0 - a), (k + 1, a)]
    }

    /// Velocities at row `v`.
    pub fn velocity_at_row(&self, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        // k_i + b (k_j - k_i) is exact when neighbouring knots agree
        let [(i, _), (j, b)] = self.weights(v);
        let (ki, kj) = (&self.knots[i], &self.knots[j]);
        (ki.1 + (kj.1 - ki.1) * b, ki.2 + (kj.2 - ki.2) * b)
    }

    /// Camera-1 pose at row `v`.
    pub fn pose_at_row(&self, v: f64, rig: &RigConfig) -> (Matrix3<f64>, Vector3<f64>) {
        let tau = rig.time(v);
        let (w, t) = self.velocity_at_row(v);
        (rotation_from_axis_angle(&w, tau), t * tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MotionModel;

    #[test]
    fn interpolation_between_knots() {
        let k = KnotMotion::new(vec![
            (-1.0, Vector3::new(0.0, 0.0, 1.0), Vector3::zeros()),
            (0.0, Vector3::new(0.0, 0.0, 2.0), Vector3::zeros()),
            (1.0, Vector3::new(0.0, 0.0, 4.0), Vector3::x()),
        ])
        .unwrap();
        assert_eq!(k.velocity_at_row(-0.5).0.z, 1.5);
        assert_eq!(k.velocity_at_row(0.5).0.z, 3.0);
        assert_eq!(k.velocity_at_row(0.5).1.x, 0.5);
        assert_eq!(k.velocity_at_row(2.0).0.z, 4.0);
        assert_eq!(k.velocity_at_row(-3.0).0.z, 1.0);
        assert!(KnotMotion::new(vec![(0.0, Vector3::zeros(), Vector3::zeros()); 2]).is_err());
    }

    #[test]
    fn constant_knots_reproduce_single_motion() {
        let m = MotionEstimate::new(MotionModel::SixDof, Vector3::new(0.1, 0.2, -0.3), Vector3::new(0.3, 0.0, 0.1), true);
        let k = KnotMotion::uniform(&m, 3, -0.5, 0.5).unwrap();
        assert_eq!(k.knots.iter().map(|x| x.0).collect::<Vec<_>>(), vec![-0.5, 0.0, 0.5]);
        let rig = RigConfig::mirrored();
        for v in [-0.7, -0.2, 0.0, 0.33] {
            let (r, t) = k.pose_at_row(v, &rig);
            let (r0, t0) = m.pose_at(v);
            assert!((r - r0).abs().max() < 1e-15 && (t - t0).norm() < 1e-15);
        }
    }
}
