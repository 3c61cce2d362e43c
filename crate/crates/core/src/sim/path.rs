use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::roadmap::Point;

/// Arc-length parameterized polyline used for ground-truth route following.
///
/// Heading is interpolated linearly between vertex headings, so it is continuous
/// along the path; curvature is piecewise constant per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutePath {
    points: Vec<Point>,
    arc: Vec<f64>,
    vertex_heading: Vec<f64>,
}

/// Position, heading and curvature at one arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPose {
    pub position: Point,
    pub heading: f64,
    pub curvature: f64,
}

impl RoutePath {
    /// Builds a path from consecutive points; repeated points are dropped.
    pub fn new(raw: &[Point]) -> Result<Self> {
        let mut points: Vec<Point> = Vec::with_capacity(raw.len());
        for p in raw {
            if points.last().is_none_or(|q| (p - q).norm() > 1e-9) {
                points.push(*p);
            }
        }
        if points.len() < 2 {
            return Err(Error::InvalidPolyline(points.len()));
        }
        let mut arc = vec![0.0];
        let mut seg_heading = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let d = w[1] - w[0];
            arc.push(arc.last().copied().unwrap_or(0.0) + d.norm());
            seg_heading.push(d.y.atan2(d.x));
        }
        let n = points.len();
        let mut vertex_heading = Vec::with_capacity(n);
        vertex_heading.push(seg_heading[0]);
        for i in 1..n - 1 {
            let a = seg_heading[i - 1];
            vertex_heading.push(wrap_angle(a + wrap_angle(seg_heading[i] - a) / 2.0));
        }
        vertex_heading.push(seg_heading[n - 2]);
        Ok(Self { points, arc, vertex_heading })
    }

    pub fn length(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Pose at arc length `s`, clamped to the path.
    pub fn pose(&self, s: f64) -> PathPose {
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.partition_point(|&a| a <= s) {
            0 => 0,
            k => (k - 1).min(self.points.len() - 2),
        };
        let len = self.arc[i + 1] - self.arc[i];
        let f = ((s - self.arc[i]) / len).clamp(0.0, 1.0);
        let position = self.points[i] + (self.points[i + 1] - self.points[i]) * f;
        let turn = wrap_angle(self.vertex_heading[i + 1] - self.vertex_heading[i]);
        PathPose { position, heading: wrap_angle(self.vertex_heading[i] + turn * f), curvature: turn / len }
    }
}

/// Samples an arc of radius `radius` around `center`, from `start` to `end`
/// (radians, either direction), roughly every `spacing` meters.
pub fn arc_points(center: Point, radius: f64, start: f64, end: f64, spacing: f64) -> Vec<Point> {
    let n = ((radius * (end - start).abs() / spacing).ceil() as usize).max(1);
    (0..=n)
        .map(|i| {
            let a = start + (end - start) * i as f64 / n as f64;
            center + Point::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

/// Samples the segment `a -> b` roughly every `spacing` meters.
pub fn line_points(a: Point, b: Point, spacing: f64) -> Vec<Point> {
    let n = (((b - a).norm() / spacing).ceil() as usize).max(1);
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn straight_path() {
        let p = RoutePath::new(&line_points(Point::new(0.0, 0.0), Point::new(100.0, 0.0), 1.0)).unwrap();
        assert!((p.length() - 100.0).abs() < 1e-9);
        let pose = p.pose(37.5);
        assert!((pose.position - Point::new(37.5, 0.0)).norm() < 1e-9);
        assert_eq!(pose.heading, 0.0);
        assert_eq!(pose.curvature, 0.0);
        assert_eq!(p.pose(500.0).position, Point::new(100.0, 0.0));
    }

    #[test]
    fn circle_curvature() {
        let pts = arc_points(Point::new(0.0, 0.0), 20.0, -FRAC_PI_2, FRAC_PI_2, 0.5);
        let p = RoutePath::new(&pts).unwrap();
        assert!((p.length() - 20.0 * PI).abs() < 0.05);
        let mid = p.pose(p.length() / 2.0);
        assert!((mid.curvature - 0.05).abs() < 1e-3);
        assert!((mid.heading - FRAC_PI_2).abs() < 0.02);
        assert!((mid.position - Point::new(20.0, 0.0)).norm() < 0.01);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(RoutePath::new(&[Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).is_err());
    }
}
