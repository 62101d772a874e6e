//! Integer rasterization and incremental line fitting.

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Integer pixel coordinate. Signed so that neighbour offsets can leave the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: i32,
    pub y: i32,
}

impl Pixel {
    #[inline]
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// True when the two pixels touch (8-neighbourhood) and are distinct.
    #[inline]
    pub fn is_adjacent(self, other: Pixel) -> bool {
        self != other && (self.x - other.x).abs() <= 1 && (self.y - other.y).abs() <= 1
    }
}

/// Midpoint (Bresenham) rasterization from `from` to `to`, both inclusive.
///
/// Walks the major axis one pixel at a time; the minor coordinate is the
/// ideal one rounded to nearest, with exact halves rounded back towards the
/// start point.
pub fn bresenham(from: Pixel, to: Pixel) -> Vec<Pixel> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let x_major = dx.abs() >= dy.abs();
    let (d_major, d_minor) = if x_major { (dx, dy) } else { (dy, dx) };
    let (s_major, s_minor) = (d_major.signum(), d_minor.signum());
    let (a_major, a_minor) = (d_major.abs(), d_minor.abs());

    let mut out = Vec::with_capacity(a_major as usize + 1);
    let (mut major, mut minor) = if x_major { (from.x, from.y) } else { (from.y, from.x) };
    let emit = |major: i32, minor: i32| {
        if x_major {
            Pixel::new(major, minor)
        } else {
            Pixel::new(minor, major)
        }
    };
    out.push(emit(major, minor));
    let mut decision = 2 * a_minor - a_major;
    for _ in 0..a_major {
        if decision > 0 {
            minor += s_minor;
            decision -= 2 * a_major;
        }
        decision += 2 * a_minor;
        major += s_major;
        out.push(emit(major, minor));
    }
    out
}

/// Running orthogonal (total) least-squares fit of a 2-D point set.
///
/// Sums are kept relative to the first point so that long chains far from
/// the origin keep their precision in `f32`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LineFit<T: Real> {
    origin: [T; 2],
    n: usize,
    sx: T,
    sy: T,
    sxx: T,
    syy: T,
    sxy: T,
}

impl<T: Real> LineFit<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points<I: IntoIterator<Item = (T, T)>>(points: I) -> Self {
        let mut fit = Self::new();
        for (x, y) in points {
            fit.push(x, y);
        }
        fit
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, x: T, y: T) {
        if self.n == 0 {
            self.origin = [x, y];
        }
        let (u, v) = (x - self.origin[0], y - self.origin[1]);
        self.n += 1;
        self.sx += u;
        self.sy += v;
        self.sxx += u * u;
        self.syy += v * v;
        self.sxy += u * v;
    }

    pub fn centroid(&self) -> [T; 2] {
        if self.n == 0 {
            return [T::zero(); 2];
        }
        let n = T::from_usize(self.n).unwrap();
        [self.origin[0] + self.sx / n, self.origin[1] + self.sy / n]
    }

    /// Centred second moments (cxx, cyy, cxy), not divided by n.
    fn scatter(&self) -> (T, T, T) {
        let n = T::from_usize(self.n.max(1)).unwrap();
        (
            self.sxx - self.sx * self.sx / n,
            self.syy - self.sy * self.sy / n,
            self.sxy - self.sx * self.sy / n,
        )
    }

    /// Unit vector along the fitted line. Defaults to +x for fewer than two points.
    pub fn direction(&self) -> [T; 2] {
        if self.n < 2 {
            return [T::one(), T::zero()];
        }
        let (cxx, cyy, cxy) = self.scatter();
        let theta = T::lit(0.5) * (T::lit(2.0) * cxy).atan2(cxx - cyy);
        [theta.cos(), theta.sin()]
    }

    /// Unit normal to the fitted line (direction rotated by +90 degrees).
    pub fn normal(&self) -> [T; 2] {
        let [dx, dy] = self.direction();
        [-dy, dx]
    }

    /// Perpendicular distance from a point to the fitted line.
    pub fn distance(&self, x: T, y: T) -> T {
        let [cx, cy] = self.centroid();
        let [nx, ny] = self.normal();
        ((x - cx) * nx + (y - cy) * ny).abs()
    }

    /// Root-mean-square perpendicular residual of the fitted points.
    pub fn rms(&self) -> T {
        if self.n < 2 {
            return T::zero();
        }
        let (cxx, cyy, cxy) = self.scatter();
        let half = T::lit(0.5);
        let tr = cxx + cyy;
        let disc = ((cxx - cyy) * (cxx - cyy) * T::lit(0.25) + cxy * cxy).sqrt();
        let minor = (half * tr - disc).max(T::zero());
        (minor / T::from_usize(self.n).unwrap()).sqrt()
    }

    /// Orthogonal projection of a point onto the fitted line.
    pub fn project(&self, x: T, y: T) -> [T; 2] {
        let [cx, cy] = self.centroid();
        let [dx, dy] = self.direction();
        let t = (x - cx) * dx + (y - cy) * dy;
        [cx + t * dx, cy + t * dy]
    }
}

/// Distance from a point to the closed segment `a`-`b`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (p[0] - (a[0] + t * dx)).hypot(p[1] - (a[1] + t * dy))
}

/// Smallest distance between two closed segments (zero when they cross).
pub fn segment_segment_distance(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    let (d1, d2) = (cross(b0, b1, a0), cross(b0, b1, a1));
    let (d3, d4) = (cross(a0, a1, b0), cross(a0, a1, b1));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn px(v: &[(i32, i32)]) -> Vec<Pixel> {
        v.iter().map(|&(x, y)| Pixel::new(x, y)).collect()
    }

    #[test]
    fn degenerate_point() {
        assert_eq!(bresenham(Pixel::new(0, 0), Pixel::new(0, 0)), px(&[(0, 0)]));
    }

    #[test]
    fn exact_diagonal() {
        assert_eq!(
            bresenham(Pixel::new(0, 0), Pixel::new(3, 3)),
            px(&[(0, 0), (1, 1), (2, 2), (3, 3)])
        );
    }

    #[test]
    fn shallow_slope_ties_round_towards_start() {
        assert_eq!(
            bresenham(Pixel::new(0, 0), Pixel::new(4, 2)),
            px(&[(0, 0), (1, 0), (2, 1), (3, 1), (4, 2)])
        );
        assert_eq!(
            bresenham(Pixel::new(4, 2), Pixel::new(0, 0)),
            px(&[(4, 2), (3, 2), (2, 1), (1, 1), (0, 0)])
        );
    }

    #[test]
    fn chains_are_connected() {
        for (a, b) in [((0, 0), (7, -3)), ((5, 5), (-2, 9)), ((1, 1), (1, -6))] {
            let chain = bresenham(Pixel::new(a.0, a.1), Pixel::new(b.0, b.1));
            assert!(chain.windows(2).all(|w| w[0].is_adjacent(w[1])));
        }
    }

    #[test]
    fn segment_distances() {
        assert_relative_eq!(point_segment_distance([5.0, 3.0], [0.0, 0.0], [10.0, 0.0]), 3.0);
        assert_relative_eq!(point_segment_distance([13.0, 4.0], [0.0, 0.0], [10.0, 0.0]), 5.0);
        assert_eq!(segment_segment_distance([0.0, 0.0], [4.0, 4.0], [0.0, 4.0], [4.0, 0.0]), 0.0);
        assert_relative_eq!(segment_segment_distance([0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [4.0, 2.0]), 2.0);
    }

    #[test]
    fn fit_recovers_line() {
        let fit = LineFit::<f64>::from_points((0..20).map(|i| (f64::from(i), 2.0 + 0.5 * f64::from(i))));
        let [dx, dy] = fit.direction();
        assert_relative_eq!(dy / dx, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.rms(), 0.0, epsilon = 1e-6);
        assert_relative_eq!(fit.distance(0.0, 3.0), 1.0 / 1.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fit_vertical_line_in_f32() {
        let fit = LineFit::<f32>::from_points((0..50).map(|i| (300.0, 200.0 + i as f32)));
        let [dx, dy] = fit.direction();
        assert!(dx.abs() < 1e-6 && (dy.abs() - 1.0).abs() < 1e-6);
        assert!(fit.distance(301.0, 10.0) - 1.0 < 1e-4);
    }

    #[test]
    fn rms_of_two_parallel_rows() {
        let pts = (0..10).flat_map(|i| [(f64::from(i), 0.0), (f64::from(i), 2.0)]);
        let fit = LineFit::from_points(pts);
        assert_relative_eq!(fit.rms(), 1.0, epsilon = 1e-12);
    }
}
