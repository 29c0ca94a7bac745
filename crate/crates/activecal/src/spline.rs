//! Clamped cubic B-spline trajectories.
//!
//! A spline over `n >= 5` control points has `n - 3` polynomial segments.
//! The knot vector is uniform with the end knots repeated four times, so
//! the curve interpolates its first and last control points and is C2 at
//! interior knots. Each segment `j` is evaluated in matrix form,
//! `T_j(q) = [1, q, q^2, q^3] * M_j * C_j`, where `C_j` stacks the four
//! control points with support on the segment and `M_j` is a per-segment
//! 4x4 basis matrix.
//!
//! The `M_j` are precomputed at build time by running the Cox-de Boor
//! recursion symbolically on each knot span with polynomial coefficients.
//! Interior segments reproduce the classic uniform cubic matrix; the end
//! segments differ because of the clamping.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::Pose2;

pub const DEGREE: usize = 3;

/// Tangent norms below this are treated as degenerate when deriving
/// headings in `sample_poses`.
const TANGENT_EPS: f64 = 1e-9;

/// Location on the curve: 1-based segment index plus the local parameter
/// `q` in `(0, 1]`; `q` near 0 is the segment start, `q = 1` its end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParam {
    pub segment: usize,
    pub q: f64,
}

impl SegmentParam {
    pub fn new(segment: usize, q: f64) -> Self {
        SegmentParam { segment, q }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClampedCubicSpline {
    points: Vec<Vector2<f64>>,
    /// `matrices[s][k][i]`: coefficient of `q^k` for the basis function of
    /// control point `s + i` on 0-based segment `s`.
    matrices: Vec<[[f64; 4]; 4]>,
}

/// Clamped uniform knot value at index `i` for `n` control points:
/// 0 repeated 4 times, 1, 2, ..., n-4, then n-3 repeated 4 times.
fn knot(i: usize, n: usize) -> f64 {
    (i.saturating_sub(DEGREE)).min(n - DEGREE) as f64
}

/// Multiply a cubic-capped polynomial by the linear factor `a0 + a1*q`.
fn mul_linear(p: &[f64; 4], a0: f64, a1: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] += a0 * p[k];
        if k + 1 < 4 {
            out[k + 1] += a1 * p[k];
        }
    }
    out
}

/// Basis matrix for 0-based segment `s`: run the Cox-de Boor recursion on
/// the span `[s, s+1]` with polynomials in the local parameter `q`, where
/// the global parameter is `t = s + q`.
fn segment_matrix(s: usize, n: usize) -> [[f64; 4]; 4] {
    let span = s + DEGREE; // knot interval [knot(span), knot(span+1)]
    let n_basis = n + DEGREE; // number of degree-0 functions
    let mut level: Vec<[f64; 4]> = vec![[0.0; 4]; n_basis];
    for (i, poly) in level.iter_mut().enumerate() {
        if i == span {
            poly[0] = 1.0;
        }
    }
    for k in 1..=DEGREE {
        let mut next: Vec<[f64; 4]> = vec![[0.0; 4]; n_basis - k];
        for (i, poly) in next.iter_mut().enumerate() {
            let (ti, tik) = (knot(i, n), knot(i + k, n));
            let (ti1, tik1) = (knot(i + 1, n), knot(i + k + 1, n));
            let mut acc = [0.0; 4];
            if tik > ti {
                // (t - t_i) / (t_{i+k} - t_i) with t = s + q
                let d = tik - ti;
                let left = mul_linear(&level[i], (s as f64 - ti) / d, 1.0 / d);
                for (a, l) in acc.iter_mut().zip(left) {
                    *a += l;
                }
            }
            if tik1 > ti1 {
                let d = tik1 - ti1;
                let right = mul_linear(&level[i + 1], (tik1 - s as f64) / d, -1.0 / d);
                for (a, r) in acc.iter_mut().zip(right) {
                    *a += r;
                }
            }
            *poly = acc;
        }
        level = next;
    }
    // Nonzero cubics on this span belong to control points s..s+3.
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            m[k][i] = level[s + i][k];
        }
    }
    m
}

impl ClampedCubicSpline {
    pub fn build(control_points: &[Vector2<f64>]) -> Result<Self> {
        if control_points.len() < DEGREE + 2 {
            return Err(Error::Spline(format!(
                "need at least {} control points, got {}",
                DEGREE + 2,
                control_points.len()
            )));
        }
        if control_points
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::Spline("non-finite control point".into()));
        }
        let n = control_points.len();
        let matrices = (0..n - DEGREE).map(|s| segment_matrix(s, n)).collect();
        Ok(ClampedCubicSpline {
            points: control_points.to_vec(),
            matrices,
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_segments(&self) -> usize {
        self.points.len() - DEGREE
    }

    pub fn control_points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    fn check(&self, sp: SegmentParam) -> Result<()> {
        if sp.segment < 1 || sp.segment > self.n_segments() {
            return Err(Error::Spline(format!(
                "segment index {} outside [1, {}]",
                sp.segment,
                self.n_segments()
            )));
        }
        if !(sp.q > 0.0 && sp.q <= 1.0) || !sp.q.is_finite() {
            return Err(Error::Spline(format!("q = {} outside (0, 1]", sp.q)));
        }
        Ok(())
    }

    /// Weighted sum `sum_k q^k * (M_s[k] . C_s)` for derivative order 0..=2.
    fn poly_eval(&self, s: usize, q: f64, order: usize) -> Vector2<f64> {
        let m = &self.matrices[s];
        let mut acc = Vector2::zeros();
        for k in order..4 {
            // d^order/dq^order of q^k
            let scale: f64 = (k - order + 1..=k).map(|v| v as f64).product::<f64>();
            let qpow = q.powi((k - order) as i32);
            let mut row = Vector2::zeros();
            for i in 0..4 {
                row += m[k][i] * self.points[s + i];
            }
            acc += scale * qpow * row;
        }
        acc
    }

    /// Point on the curve at `sp`.
    pub fn evaluate(&self, sp: SegmentParam) -> Result<Vector2<f64>> {
        self.check(sp)?;
        Ok(self.poly_eval(sp.segment - 1, sp.q, 0))
    }

    /// First or second derivative with respect to the local parameter.
    pub fn derivative(&self, sp: SegmentParam, order: usize) -> Result<Vector2<f64>> {
        self.check(sp)?;
        if order == 0 || order > 2 {
            return Err(Error::Spline(format!(
                "derivative order {} not in {{1, 2}}",
                order
            )));
        }
        Ok(self.poly_eval(sp.segment - 1, sp.q, order))
    }

    /// Evaluation on the closed local interval `[0, 1]`; used internally
    /// where the segment-start limit is needed (e.g. the curve start).
    pub(crate) fn eval_closed(&self, segment0: usize, q: f64, order: usize) -> Vector2<f64> {
        self.poly_eval(segment0, q, order)
    }

    /// Poses sampled at `samples_per_segment` uniform `q` steps per segment
    /// (plus the curve start). Headings come from the curve tangent;
    /// near-zero tangents inherit the previous sample's heading, with 0 as
    /// the default for a degenerate start.
    pub fn sample_poses(&self, samples_per_segment: usize) -> Vec<Pose2> {
        assert!(samples_per_segment >= 2, "samples_per_segment must be >= 2");
        let n_seg = self.n_segments();
        let total = n_seg * samples_per_segment;
        let mut poses = Vec::with_capacity(total + 1);
        let mut heading = 0.0;
        for k in 0..=total {
            let s = (k / samples_per_segment).min(n_seg - 1);
            let q = (k - s * samples_per_segment) as f64 / samples_per_segment as f64;
            let p = self.eval_closed(s, q, 0);
            let v = self.eval_closed(s, q, 1);
            if v.norm() >= TANGENT_EPS {
                heading = v.y.atan2(v.x);
            }
            poses.push(Pose2::new(p.x, p.y, heading));
        }
        poses
    }

    /// Replace the control points that only affect segments from
    /// `from_segment` (1-based) onward. Points with index below
    /// `from_segment + 2` are frozen: they pin position, velocity, and
    /// acceleration at the replanning knot, so the executed part of the
    /// curve and C2 continuity at the junction are preserved.
    pub fn replace_tail(
        &self,
        from_segment: usize,
        new_tail_points: &[Vector2<f64>],
    ) -> Result<Self> {
        let n = self.n_points();
        if from_segment < 2 || from_segment > self.n_segments() {
            return Err(Error::Spline(format!(
                "from_segment {} outside [2, {}]",
                from_segment,
                self.n_segments()
            )));
        }
        let frozen = from_segment + DEGREE - 1; // indices 0..frozen stay
        let free = n - frozen;
        if new_tail_points.len() != free {
            return Err(Error::Spline(format!(
                "tail length {} does not match the {} replaceable points",
                new_tail_points.len(),
                free
            )));
        }
        let mut points = self.points.clone();
        points[frozen..].copy_from_slice(new_tail_points);
        Self::build(&points)
    }

    /// Number of control points replaced by `replace_tail(from_segment, _)`.
    pub fn tail_len(&self, from_segment: usize) -> usize {
        self.n_points() - (from_segment + DEGREE - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    /// Independent Cox-de Boor recursion, evaluated numerically per query.
    /// Intervals are taken left-open/right-closed to match q in (0, 1].
    pub(crate) fn de_boor_eval(points: &[Vector2<f64>], sp: SegmentParam) -> Vector2<f64> {
        let n = points.len();
        let t = (sp.segment - 1) as f64 + sp.q;
        fn basis(i: usize, k: usize, t: f64, n: usize) -> f64 {
            if k == 0 {
                return if knot(i, n) < t && t <= knot(i + 1, n) {
                    1.0
                } else {
                    0.0
                };
            }
            let mut acc = 0.0;
            let (ti, tik) = (knot(i, n), knot(i + k, n));
            if tik > ti {
                acc += (t - ti) / (tik - ti) * basis(i, k - 1, t, n);
            }
            let (ti1, tik1) = (knot(i + 1, n), knot(i + k + 1, n));
            if tik1 > ti1 {
                acc += (tik1 - t) / (tik1 - ti1) * basis(i + 1, k - 1, t, n);
            }
            acc
        }
        let mut p = Vector2::zeros();
        for (i, c) in points.iter().enumerate() {
            p += basis(i, DEGREE, t, n) * c;
        }
        p
    }

    fn random_points(rng: &mut impl rand::Rng, n: usize) -> Vec<Vector2<f64>> {
        (0..n)
            .map(|_| Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn build_rejects_bad_input() {
        let pts = vec![Vector2::new(0.0, 0.0); 4];
        assert!(ClampedCubicSpline::build(&pts).is_err());
        let mut pts = vec![Vector2::new(0.0, 0.0); 5];
        pts[2].x = f64::NAN;
        assert!(ClampedCubicSpline::build(&pts).is_err());
    }

    #[test]
    fn interior_segment_matrix_is_the_uniform_cubic_matrix() {
        // Far from the clamped ends the basis matrix must reduce to
        // (1/6) [[1,4,1,0], [-3,0,3,0], [3,-6,3,0], [-1,3,-3,1]].
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(7), 12);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        let expected = [
            [1.0, 4.0, 1.0, 0.0],
            [-3.0, 0.0, 3.0, 0.0],
            [3.0, -6.0, 3.0, 0.0],
            [-1.0, 3.0, -3.0, 1.0],
        ];
        let m = &s.matrices[4];
        for k in 0..4 {
            for i in 0..4 {
                assert_relative_eq!(m[k][i], expected[k][i] / 6.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_and_collinear_control_polygons() {
        let c = Vector2::new(0.7, -0.3);
        let s = ClampedCubicSpline::build(&vec![c; 5]).unwrap();
        for q in [0.1, 0.5, 1.0] {
            for j in 1..=s.n_segments() {
                let p = s.evaluate(SegmentParam::new(j, q)).unwrap();
                assert_relative_eq!(p, c, epsilon = 1e-12);
                let d = s.derivative(SegmentParam::new(j, q), 1).unwrap();
                assert_relative_eq!(d.norm(), 0.0, epsilon = 1e-12);
            }
        }

        let pts: Vec<_> = (0..5).map(|i| Vector2::new(i as f64, 0.0)).collect();
        let s = ClampedCubicSpline::build(&pts).unwrap();
        for q in [0.25, 0.75, 1.0] {
            let p = s.evaluate(SegmentParam::new(1, q)).unwrap();
            assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
            let d = s.derivative(SegmentParam::new(1, q), 1).unwrap();
            assert!(d.x > 0.0);
            assert_relative_eq!(d.y, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clamped_endpoint_interpolation() {
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(3), 7);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        let start = s.evaluate(SegmentParam::new(1, 1e-12)).unwrap();
        assert_relative_eq!(start, pts[0], epsilon = 1e-9);
        let end = s.evaluate(SegmentParam::new(s.n_segments(), 1.0)).unwrap();
        assert_relative_eq!(end, pts[6], epsilon = 1e-9);
    }

    #[test]
    fn matches_de_boor_oracle_at_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [5usize, 6, 8, 11] {
            let pts = random_points(&mut rng, n);
            let s = ClampedCubicSpline::build(&pts).unwrap();
            for _ in 0..250 {
                let sp = SegmentParam::new(
                    rng.gen_range(1..=s.n_segments()),
                    rng.gen_range(1e-6..=1.0),
                );
                let ours = s.evaluate(sp).unwrap();
                let oracle = de_boor_eval(&pts, sp);
                assert!(
                    (ours - oracle).norm() < 1e-10,
                    "mismatch at {:?}: {} vs {}",
                    sp,
                    ours,
                    oracle
                );
            }
        }
    }

    #[test]
    fn c2_continuity_at_interior_knots() {
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(5), 9);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        for j in 1..s.n_segments() {
            for order in 0..=2 {
                let left = s.eval_closed(j - 1, 1.0, order);
                let right = s.eval_closed(j, 0.0, order);
                assert!(
                    (left - right).norm() < 1e-9,
                    "order-{} jump at knot {}",
                    order,
                    j
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(9), 8);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        let h = 1e-6;
        let sp = SegmentParam::new(2, 0.5);
        let d1 = s.derivative(sp, 1).unwrap();
        let fd1 = (s.eval_closed(1, 0.5 + h, 0) - s.eval_closed(1, 0.5 - h, 0)) / (2.0 * h);
        assert!((d1 - fd1).norm() / d1.norm().max(1.0) < 1e-5);
        let d2 = s.derivative(sp, 2).unwrap();
        let fd2 = (s.eval_closed(1, 0.5 + h, 1) - s.eval_closed(1, 0.5 - h, 1)) / (2.0 * h);
        assert!((d2 - fd2).norm() / d2.norm().max(1.0) < 1e-5);
        assert!(s.derivative(sp, 3).is_err());
        assert!(s.derivative(sp, 0).is_err());
    }

    #[test]
    fn sample_poses_headings() {
        let pts: Vec<_> = (0..6).map(|i| Vector2::new(i as f64, 0.0)).collect();
        let s = ClampedCubicSpline::build(&pts).unwrap();
        for p in s.sample_poses(4) {
            assert_relative_eq!(p.theta, 0.0, epsilon = 1e-12);
        }

        // Degenerate curve: headings stay at the documented default.
        let s = ClampedCubicSpline::build(&vec![Vector2::new(1.0, 1.0); 5]).unwrap();
        for p in s.sample_poses(3) {
            assert_eq!(p.theta, 0.0);
        }

        // Control polygon around a circle: headings advance monotonically
        // (mod 2*pi), matching the tangent angles of the sampled polyline.
        let n = 12;
        let pts: Vec<_> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        let s = ClampedCubicSpline::build(&pts).unwrap();
        let poses = s.sample_poses(6);
        let mut total_turn = 0.0;
        for w in poses.windows(2) {
            let d = crate::geometry::wrap_angle_unchecked(w[1].theta - w[0].theta);
            assert!(d > -1e-9, "heading regressed by {}", d);
            total_turn += d;
        }
        assert!(total_turn > 3.0); // most of a full turn
    }

    #[test]
    fn replace_tail_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = random_points(&mut rng, 8);
        let s = ClampedCubicSpline::build(&pts).unwrap();

        let same = s.replace_tail(2, &pts[4..]).unwrap();
        assert_eq!(s, same);

        assert!(s.replace_tail(1, &pts[3..]).is_err());
        assert!(s.replace_tail(6, &pts[7..]).is_err());
        assert!(s.replace_tail(3, &pts[4..]).is_err()); // wrong length

        // Replacing only the last point moves only the final segment.
        let tail = vec![pts[7] + Vector2::new(0.5, -0.4)];
        let moved = s.replace_tail(s.n_segments(), &tail).unwrap();
        for j in 1..s.n_segments() {
            for q in [0.2, 0.6, 1.0] {
                let a = s.evaluate(SegmentParam::new(j, q)).unwrap();
                let b = moved.evaluate(SegmentParam::new(j, q)).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn local_support_sweep() {
        // Perturbing control point i changes the curve only on segments
        // whose support window contains i.
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(33), 9);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        for i in 0..pts.len() {
            let mut bumped = pts.clone();
            bumped[i] += Vector2::new(0.3, 0.2);
            let b = ClampedCubicSpline::build(&bumped).unwrap();
            for j in 1..=s.n_segments() {
                let supported = (j - 1..j + 3).contains(&i);
                let mut max_delta: f64 = 0.0;
                for q in [0.1, 0.5, 0.9] {
                    let d = (s.evaluate(SegmentParam::new(j, q)).unwrap()
                        - b.evaluate(SegmentParam::new(j, q)).unwrap())
                    .norm();
                    max_delta = max_delta.max(d);
                }
                if supported {
                    assert!(max_delta > 1e-6, "segment {} should move for point {}", j, i);
                } else {
                    assert!(
                        max_delta < 1e-12,
                        "segment {} moved by {} for point {}",
                        j,
                        max_delta,
                        i
                    );
                }
            }
        }
    }

    #[test]
    fn out_of_range_parameters_error() {
        let pts = random_points(&mut ChaCha8Rng::seed_from_u64(2), 6);
        let s = ClampedCubicSpline::build(&pts).unwrap();
        assert!(s.evaluate(SegmentParam::new(0, 0.5)).is_err());
        assert!(s.evaluate(SegmentParam::new(4, 0.5)).is_err());
        assert!(s.evaluate(SegmentParam::new(1, 0.0)).is_err());
        assert!(s.evaluate(SegmentParam::new(1, 1.0 + 1e-9)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn convex_hull_property(seed in 0u64..1000, n in 5usize..10) {
            let pts = random_points(&mut ChaCha8Rng::seed_from_u64(seed), n);
            let s = ClampedCubicSpline::build(&pts).unwrap();
            for j in 1..=s.n_segments() {
                for step in 1..=8 {
                    let q = step as f64 / 8.0;
                    let p = s.evaluate(SegmentParam::new(j, q)).unwrap();
                    let support = &pts[j - 1..j + 3];
                    prop_assert!(in_convex_hull(p, support, 1e-9));
                }
            }
        }

        #[test]
        fn partition_of_unity_via_oracle(seed in 0u64..1000) {
            // The oracle itself must reproduce a translated copy exactly:
            // shifting all control points shifts the curve.
            let pts = random_points(&mut ChaCha8Rng::seed_from_u64(seed), 7);
            let shift = Vector2::new(3.0, -2.0);
            let shifted: Vec<_> = pts.iter().map(|p| p + shift).collect();
            let sp = SegmentParam::new(2, 0.37);
            let a = de_boor_eval(&pts, sp);
            let b = de_boor_eval(&shifted, sp);
            prop_assert!(((b - a) - shift).norm() < 1e-10);
        }
    }

    /// Distance-to-hull check via half planes of the polygon hull.
    fn in_convex_hull(p: Vector2<f64>, pts: &[Vector2<f64>], slack: f64) -> bool {
        // Gift wrapping over at most 4 points.
        let mut hull: Vec<Vector2<f64>> = Vec::new();
        let start = (0..pts.len())
            .min_by(|&a, &b| {
                (pts[a].x, pts[a].y)
                    .partial_cmp(&(pts[b].x, pts[b].y))
                    .unwrap()
            })
            .unwrap();
        let mut cur = start;
        loop {
            hull.push(pts[cur]);
            let mut next = (cur + 1) % pts.len();
            for cand in 0..pts.len() {
                if cand == cur {
                    continue;
                }
                let a = pts[next] - pts[cur];
                let b = pts[cand] - pts[cur];
                let cross = a.x * b.y - a.y * b.x;
                if cross < -1e-15 || (cross.abs() < 1e-15 && b.norm() > a.norm()) {
                    next = cand;
                }
            }
            cur = next;
            if cur == start || hull.len() > pts.len() {
                break;
            }
        }
        if hull.len() < 3 {
            // Degenerate (collinear) hull: distance to the segment set.
            return pts.iter().any(|c| (p - c).norm() < 4.0 + slack);
        }
        for i in 0..hull.len() {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let e = b - a;
            let out = Vector2::new(e.y, -e.x); // outward for ccw hull
            let d = (p - a).dot(&out) / out.norm().max(1e-300);
            if d > slack {
                return false;
            }
        }
        true
    }
}
