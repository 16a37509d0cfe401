//! Planar ellipses and the minimum-volume enclosing ellipse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// `{x : (x - center)^T shape (x - center) <= 1}` with `shape` symmetric
/// positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point,
    pub shape: Mat2,
}

/// Eigen-decomposition of a symmetric 2x2 matrix: eigenvalues ascending, and
/// the matching unit eigenvectors as columns.
pub fn sym_eigen(m: &Mat2) -> ([f64; 2], Mat2) {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let rad = half_diff.hypot(b);
    let (l1, l2) = (mean - rad, mean + rad);
    if b == 0.0 {
        return if a <= d {
            ([a, d], [[1.0, 0.0], [0.0, 1.0]])
        } else {
            ([d, a], [[0.0, 1.0], [1.0, 0.0]])
        };
    }
    // Eigenvector for the larger eigenvalue, built from the better-conditioned row.
    let (vx, vy) = if half_diff >= 0.0 {
        (half_diff + rad, b)
    } else {
        (b, rad - half_diff)
    };
    let n = vx.hypot(vy);
    let (vx, vy) = (vx / n, vy / n);
    ([l1, l2], [[-vy, vx], [vx, vy]])
}

pub fn inverse2(m: &Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

impl Ellipse {
    pub fn new(center: Point, shape: Mat2) -> Result<Self> {
        let e = Ellipse { center, shape };
        let sym = (shape[0][1] - shape[1][0]).abs();
        let scale = shape[0][0].abs().max(shape[1][1].abs());
        if !(sym <= 1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidConfig("ellipse shape is not symmetric".into()));
        }
        if !(e.eigenvalues()[0] > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "ellipse shape is not positive definite".into(),
            ));
        }
        Ok(e)
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        let m = 1.0 / (radius * radius);
        Ellipse {
            center,
            shape: [[m, 0.0], [0.0, m]],
        }
    }

    /// Squared Mahalanobis radius of `p`.
    pub fn radius2(&self, p: Point) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let m = &self.shape;
        dx * (m[0][0] * dx + m[0][1] * dy) + dy * (m[1][0] * dx + m[1][1] * dy)
    }

    pub fn radius(&self, p: Point) -> f64 {
        self.radius2(p).max(0.0).sqrt()
    }

    /// The ellipse whose boundary is the level set at Mahalanobis radius `r`.
    pub fn scaled(&self, r: f64) -> Ellipse {
        let f = 1.0 / (r * r);
        Ellipse {
            center: self.center,
            shape: [
                [self.shape[0][0] * f, self.shape[0][1] * f],
                [self.shape[1][0] * f, self.shape[1][1] * f],
            ],
        }
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        sym_eigen(&self.shape).0
    }

    /// Area of the ellipse.
    pub fn area(&self) -> f64 {
        let det = self.shape[0][0] * self.shape[1][1] - self.shape[0][1] * self.shape[1][0];
        std::f64::consts::PI / det.sqrt()
    }

    /// Support function: `max_{x in E} g.x = g.c + sqrt(g^T M^-1 g)`, together
    /// with the maximizer.
    pub fn support(&self, g: Point) -> (f64, Point) {
        let inv = inverse2(&self.shape).expect("positive definite");
        let mg = [
            inv[0][0] * g[0] + inv[0][1] * g[1],
            inv[1][0] * g[0] + inv[1][1] * g[1],
        ];
        let q = (g[0] * mg[0] + g[1] * mg[1]).max(0.0).sqrt();
        let base = g[0] * self.center[0] + g[1] * self.center[1];
        if q == 0.0 {
            return (base, self.center);
        }
        (
            base + q,
            [self.center[0] + mg[0] / q, self.center[1] + mg[1] / q],
        )
    }

    /// Boundary point at parameter angle `t`.
    pub fn boundary_point(&self, t: f64) -> Point {
        let (vals, vecs) = sym_eigen(&self.shape);
        let a = 1.0 / vals[0].sqrt();
        let b = 1.0 / vals[1].sqrt();
        let (u, v) = (a * t.cos(), b * t.sin());
        [
            self.center[0] + vecs[0][0] * u + vecs[0][1] * v,
            self.center[1] + vecs[1][0] * u + vecs[1][1] * v,
        ]
    }

    /// Euclidean projection onto the filled ellipse.
    ///
    /// The minimizer is `c + (I + λM)^-1 (p - c)` with `λ >= 0` the root of the
    /// secular equation `sum m_i y_i^2 / (1 + λ m_i)^2 = 1`, found by Newton's
    /// method (monotone from λ = 0 because the left side is convex decreasing)
    /// with a bisection fallback.
    pub fn project(&self, p: Point) -> Point {
        if self.radius2(p) <= 1.0 {
            return p;
        }
        let (m, q) = sym_eigen(&self.shape);
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let y = [q[0][0] * d[0] + q[1][0] * d[1], q[0][1] * d[0] + q[1][1] * d[1]];
        let phi = |l: f64| -> (f64, f64) {
            let mut f = -1.0;
            let mut df = 0.0;
            for i in 0..2 {
                let den = 1.0 + l * m[i];
                let t = m[i] * y[i] * y[i] / (den * den);
                f += t;
                df -= 2.0 * t * m[i] / den;
            }
            (f, df)
        };
        let mut lo = 0.0f64;
        let mut hi = {
            // phi(hi) <= 0 at hi = sqrt(sum m y^2)/min(m) works since each term is
            // at most m y^2 / (l m)^2.
            let s = (m[0] * y[0] * y[0] + m[1] * y[1] * y[1]).sqrt();
            (s / m[0].min(m[1])).max(1e-300)
        };
        let mut l = 0.0;
        for _ in 0..200 {
            let (f, df) = phi(l);
            if f.abs() <= 1e-14 {
                break;
            }
            if f > 0.0 {
                lo = lo.max(l);
            } else {
                hi = hi.min(l);
            }
            let mut next = if df < 0.0 { l - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - l).abs() <= 1e-15 * next.abs().max(1e-300) {
                l = next;
                break;
            }
            l = next;
        }
        let z = [y[0] / (1.0 + l * m[0]), y[1] / (1.0 + l * m[1])];
        [
            self.center[0] + q[0][0] * z[0] + q[0][1] * z[1],
            self.center[1] + q[1][0] * z[0] + q[1][1] * z[1],
        ]
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
        * 0.5
}

fn inverse3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof[j][i] / det;
        }
    }
    Some(inv)
}

const MVE_MAX_ITERS: usize = 200_000;

/// Minimum-volume enclosing ellipse (Löwner-John) of a planar point set.
///
/// Khachiyan's barycentric coordinate ascent with Todd-Yildirim away steps,
/// run on the convex hull. Stops once every lifted leverage lies within
/// `(1 ± tol)` of 3, then rescales so the farthest input point sits exactly on
/// the boundary. Point clouds with no interior (a single point or a segment)
/// get a small circle around their centroid.
pub fn min_volume_ellipse(points: &[Point], tol: f64) -> Result<Ellipse> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let hull = convex_hull(points);
    let n = points.len() as f64;
    let centroid = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let spread = points
        .iter()
        .map(|p| (p[0] - centroid[0]).hypot(p[1] - centroid[1]))
        .fold(0.0, f64::max);
    let degenerate = hull.len() < 3 || polygon_area(&hull) <= 1e-12 * spread * spread;
    if degenerate {
        return Ok(Ellipse::circle(centroid, spread.max(1e-6)));
    }

    let m = hull.len();
    let dim = 2.0;
    let mut u = vec![1.0 / m as f64; m];
    let mut kappa = vec![0.0; m];
    for _ in 0..MVE_MAX_ITERS {
        let mut x = [[0.0; 3]; 3];
        for (p, &w) in hull.iter().zip(&u) {
            let q = [p[0], p[1], 1.0];
            for i in 0..3 {
                for j in 0..3 {
                    x[i][j] += w * q[i] * q[j];
                }
            }
        }
        let Some(xi) = inverse3(&x) else { break };
        for (k, p) in kappa.iter_mut().zip(&hull) {
            let q = [p[0], p[1], 1.0];
            *k = (0..3)
                .map(|i| q[i] * (0..3).map(|j| xi[i][j] * q[j]).sum::<f64>())
                .sum();
        }
        let (jmax, kmax) = argmax(kappa.iter().copied());
        let (jmin, kmin) = argmin(
            kappa
                .iter()
                .zip(&u)
                .map(|(&k, &w)| if w > 0.0 { k } else { f64::INFINITY }),
        );
        let up = kmax / (dim + 1.0) - 1.0;
        let down = 1.0 - kmin / (dim + 1.0);
        if up <= tol && down <= tol {
            break;
        }
        let (j, kj) = if up > down { (jmax, kmax) } else { (jmin, kmin) };
        let mut step = (kj - (dim + 1.0)) / ((dim + 1.0) * (kj - 1.0));
        if step < 0.0 {
            step = step.max(-u[j] / (1.0 - u[j]));
        }
        for w in u.iter_mut() {
            *w *= 1.0 - step;
        }
        u[j] += step;
        if u[j] < 0.0 {
            u[j] = 0.0;
        }
    }

    let center = hull
        .iter()
        .zip(&u)
        .fold([0.0, 0.0], |acc, (p, &w)| [acc[0] + w * p[0], acc[1] + w * p[1]]);
    let mut cov = [[0.0; 2]; 2];
    for (p, &w) in hull.iter().zip(&u) {
        let d = [p[0] - center[0], p[1] - center[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += w * d[i] * d[j];
            }
        }
    }
    let Some(ci) = inverse2(&cov) else {
        return Ok(Ellipse::circle(centroid, spread.max(1e-6)));
    };
    let shape = [
        [ci[0][0] / dim, 0.5 * (ci[0][1] + ci[1][0]) / dim],
        [0.5 * (ci[0][1] + ci[1][0]) / dim, ci[1][1] / dim],
    ];
    let raw = Ellipse { center, shape };
    let rmax = hull.iter().map(|&p| raw.radius2(p)).fold(0.0, f64::max);
    let e = raw.scaled(rmax.sqrt());
    Ellipse::new(e.center, e.shape)
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b })
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate()
        .fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b })
}
