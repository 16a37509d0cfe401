#![allow(dead_code)]

use rand::Rng;
use stratdesign::regions::{Ellipse, Point, VarianceRegion, MAX_VARIANCE};

pub const FLOOR: f64 = 1e-8;

/// Ellipse with the given semi-axes and rotation.
pub fn rotated(center: Point, a: f64, b: f64, theta: f64) -> Ellipse {
    let (c, s) = (theta.cos(), theta.sin());
    let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
    let shape = [
        [c * c * ia + s * s * ib, c * s * (ia - ib)],
        [c * s * (ia - ib), s * s * ia + c * c * ib],
    ];
    Ellipse::new(center, shape).unwrap()
}

pub fn random_region<R: Rng>(rng: &mut R, min_axis: f64, max_axis: f64) -> VarianceRegion {
    let center = [rng.gen_range(0.02..0.24), rng.gen_range(0.02..0.24)];
    let e = rotated(
        center,
        rng.gen_range(min_axis..max_axis),
        rng.gen_range(min_axis..max_axis),
        rng.gen_range(0.0..std::f64::consts::PI),
    );
    VarianceRegion::new(e, FLOOR, MAX_VARIANCE)
}

pub fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Points of the region: a regular grid plus dense samples of both boundaries.
pub fn region_samples(region: &VarianceRegion, grid: usize, boundary: usize) -> Vec<Point> {
    let (lo, hi) = (region.box_lo, region.box_hi);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut pts: Vec<Point> = (0..grid)
        .flat_map(|i| (0..grid).map(move |j| [lo + i as f64 * step, lo + j as f64 * step]))
        .collect();
    for i in 0..boundary {
        let t = i as f64 / boundary as f64;
        pts.push(region.ellipse.boundary_point(t * std::f64::consts::TAU));
        let u = lo + t * (hi - lo);
        pts.extend([[u, lo], [u, hi], [lo, u], [hi, u]]);
    }
    pts.retain(|&p| region.contains(p));
    pts
}
