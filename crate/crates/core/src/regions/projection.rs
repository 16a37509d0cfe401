//! Euclidean projection onto an ellipse intersected with a square box.

use super::ellipse::Point;
use super::VarianceRegion;
use crate::error::{Error, Result};

pub const MAX_DYKSTRA_ROUNDS: usize = 500;
const STEP_TOL: f64 = 1e-11;

/// Projection onto `ellipse ∩ box`.
///
/// When one set's own projection already lands in the other set it is the
/// answer. Otherwise both constraints are active and Dykstra's alternating
/// projections are run until the iterates and the correction terms settle.
/// If they do not settle within [`MAX_DYKSTRA_ROUNDS`], the answer is taken
/// from [`project_by_edges`].
pub fn project_onto_region(point: Point, region: &VarianceRegion) -> Result<Point> {
    if region.contains(point) {
        return Ok(point);
    }
    let on_ellipse = region.ellipse.project(point);
    if region.in_box(on_ellipse) {
        return Ok(on_ellipse);
    }
    let on_box = region.clamp(point);
    if region.ellipse.radius2(on_box) <= 1.0 {
        return Ok(on_box);
    }
    dykstra(point, region).or_else(|_| project_by_edges(point, region))
}

/// Exact projection by enumeration. With both constraints active the nearest
/// point sits on a box edge, so it is the projection onto one of the four
/// chords cut from the edges by the ellipse.
pub fn project_by_edges(point: Point, region: &VarianceRegion) -> Result<Point> {
    let mut candidates = vec![point, region.ellipse.project(point), region.clamp(point)];
    let (lo, hi) = (region.box_lo, region.box_hi);
    for axis in 0..2 {
        for v in [lo, hi] {
            if let Some((a, b)) = chord(region, axis, v) {
                let mut c = [0.0; 2];
                c[axis] = v;
                c[1 - axis] = point[1 - axis].clamp(a, b);
                candidates.push(c);
            }
        }
    }
    candidates
        .into_iter()
        .filter(|&c| region.in_box(c) && region.ellipse.radius2(c) <= 1.0 + 1e-9)
        .min_by(|a, b| dist(*a, point).total_cmp(&dist(*b, point)))
        .ok_or_else(|| {
            Error::ProjectionFailed(format!(
                "region is empty near point ({}, {})",
                point[0], point[1]
            ))
        })
}

/// Interval of the free coordinate on the line `x[axis] = v` inside both the
/// ellipse and the box.
fn chord(region: &VarianceRegion, axis: usize, v: f64) -> Option<(f64, f64)> {
    let (e, other) = (&region.ellipse, 1 - axis);
    let a = e.shape;
    let d = v - e.center[axis];
    let (a_oo, a_ao) = (a[other][other], a[axis][other]);
    let disc = (a_ao * d).powi(2) - a_oo * (a[axis][axis] * d * d - 1.0);
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let lo = (e.center[other] + (-a_ao * d - root) / a_oo).max(region.box_lo);
    let hi = (e.center[other] + (-a_ao * d + root) / a_oo).min(region.box_hi);
    (lo <= hi).then_some((lo, hi))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn dykstra(point: Point, region: &VarianceRegion) -> Result<Point> {
    let mut x = point;
    let mut inc_box = [0.0; 2];
    let mut inc_ell = [0.0; 2];
    for _ in 0..MAX_DYKSTRA_ROUNDS {
        let y = region.clamp([x[0] + inc_box[0], x[1] + inc_box[1]]);
        let new_box = [x[0] + inc_box[0] - y[0], x[1] + inc_box[1] - y[1]];
        let z = region
            .ellipse
            .project([y[0] + inc_ell[0], y[1] + inc_ell[1]]);
        let new_ell = [y[0] + inc_ell[0] - z[0], y[1] + inc_ell[1] - z[1]];
        let settled = dist(z, x) < STEP_TOL
            && dist(y, z) < STEP_TOL
            && dist(new_box, inc_box) < STEP_TOL
            && dist(new_ell, inc_ell) < STEP_TOL;
        x = z;
        inc_box = new_box;
        inc_ell = new_ell;
        if settled {
            let out = region.clamp(x);
            if region.ellipse.radius2(out) <= 1.0 + 1e-9 {
                return Ok(out);
            }
        }
    }
    Err(Error::ProjectionFailed(format!(
        "Dykstra iterations did not settle for point ({}, {})",
        point[0], point[1]
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::ellipse::Ellipse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_disk_box() -> VarianceRegion {
        VarianceRegion::new(Ellipse::circle([0.0, 0.0], 1.0), -1.0, 1.0)
    }

    #[test]
    fn interior_point_is_fixed() {
        let r = unit_disk_box();
        assert_eq!(project_onto_region([0.2, -0.3], &r).unwrap(), [0.2, -0.3]);
    }

    #[test]
    fn radial_projection() {
        let r = unit_disk_box();
        let p = project_onto_region([2.0, 0.0], &r).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-10 && p[1].abs() < 1e-10);
    }

    #[test]
    fn grid_oracle() {
        let e = Ellipse::new([0.15, 0.2], [[900.0, 200.0], [200.0, 400.0]]).unwrap();
        let region = VarianceRegion::new(e, 1e-8, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid: Vec<Point> = (0..200)
            .flat_map(|i| (0..200).map(move |j| [i as f64 * 0.25 / 199.0, j as f64 * 0.25 / 199.0]))
            .filter(|&p| region.contains(p))
            .collect();
        assert!(!grid.is_empty());
        for _ in 0..30 {
            let p = [rng.gen_range(-0.1..0.4), rng.gen_range(-0.1..0.4)];
            let x = project_onto_region(p, &region).unwrap();
            assert!(region.contains(x));
            let d = dist(x, p);
            for g in &grid {
                assert!(dist(*g, p) >= d - 1e-12);
            }
        }
    }

    #[test]
    fn edge_enumeration_matches_dykstra() {
        let e = Ellipse::new([0.2, 0.22], [[400.0, 150.0], [150.0, 900.0]]).unwrap();
        let region = VarianceRegion::new(e, 1e-8, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let p = [rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..1.0)];
            let a = project_onto_region(p, &region).unwrap();
            let b = project_by_edges(p, &region).unwrap();
            assert!(dist(a, b) < 1e-8, "{p:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn dykstra_handles_corner_cases() {
        // Ellipse pokes out of the top edge; points above-right land on the
        // crossing of the ellipse boundary with the edge.
        let e = Ellipse::new([0.2, 0.22], [[400.0, 0.0], [0.0, 900.0]]).unwrap();
        let region = VarianceRegion::new(e, 1e-8, 0.25);
        let p = [0.23, 0.5];
        assert!(!region.in_box(e.project(p)));
        assert!(e.radius2(region.clamp(p)) > 1.0);
        let x = project_onto_region(p, &region).unwrap();
        // crossing of y = 0.25 with the ellipse: 400 dx^2 + 900 * 0.03^2 = 1
        let expect = 0.2 + (0.19f64 / 400.0).sqrt();
        assert!((x[0] - expect).abs() < 1e-9 && (x[1] - 0.25).abs() < 1e-10, "{x:?}");
    }
}
