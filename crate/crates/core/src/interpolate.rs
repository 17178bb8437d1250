//! Contours for slices skipped during propagation.
//!
//! Both bracketing contours are resampled as radial profiles: `k` rays about
//! each contour's own centroid, one radius per ray. The missing slice gets the
//! linearly blended centroid and, per angle, the linearly blended radius.

use crate::error::{Error, Result};
use crate::point::Point2;
use crate::template::{centroid, intersect_ray_polygon, ray_angles, Template};
use std::collections::BTreeMap;
use std::ops::RangeInclusive;

/// Centroid and per-angle radii of a closed polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub center: Point2,
    pub radii: Vec<f64>,
}

impl RadialProfile {
    pub fn of(polygon: &[Point2], k: usize) -> Result<Self> {
        let center = centroid(polygon)?;
        let t = Template::new(polygon.to_vec(), 0)?;
        let radii = ray_angles(k)?
            .into_iter()
            .map(|a| intersect_ray_polygon(center, a, &t).map(|ip| ip.distance(center)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { center, radii })
    }

    pub fn blend(&self, other: &RadialProfile, t: f64) -> RadialProfile {
        RadialProfile {
            center: self.center.lerp(other.center, t),
            radii: self
                .radii
                .iter()
                .zip(&other.radii)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        }
    }

    pub fn polygon(&self) -> Vec<Point2> {
        let k = self.radii.len();
        self.radii
            .iter()
            .enumerate()
            .map(|(i, &r)| Point2::from_polar(self.center, r, std::f64::consts::TAU * i as f64 / k as f64))
            .collect()
    }
}

/// Contour at fraction `t` of the way from `a` to `b`.
pub fn interpolate_contour(a: &[Point2], b: &[Point2], t: f64, k: usize) -> Result<Vec<Point2>> {
    Ok(RadialProfile::of(a, k)?.blend(&RadialProfile::of(b, k)?, t).polygon())
}

/// Interpolated contours for every slice of `range` not present in `known`.
/// Fails, listing them, if some missing slices have no known contour on both sides.
pub fn interpolate_gaps(
    known: &BTreeMap<usize, Vec<Point2>>,
    range: RangeInclusive<usize>,
    k: usize,
) -> Result<BTreeMap<usize, Vec<Point2>>> {
    let missing: Vec<usize> = range.filter(|z| !known.contains_key(z)).collect();
    let orphans: Vec<usize> = missing
        .iter()
        .copied()
        .filter(|&z| known.range(..z).next_back().is_none() || known.range(z..).next().is_none())
        .collect();
    if !orphans.is_empty() {
        return Err(Error::Interpolation(orphans));
    }
    let mut profiles: BTreeMap<usize, RadialProfile> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for z in missing {
        let (&za, pa) = known.range(..z).next_back().expect("bracketed");
        let (&zb, pb) = known.range(z..).next().expect("bracketed");
        for (zz, p) in [(za, pa), (zb, pb)] {
            if let std::collections::btree_map::Entry::Vacant(e) = profiles.entry(zz) {
                e.insert(RadialProfile::of(p, k)?);
            }
        }
        let t = (z - za) as f64 / (zb - za) as f64;
        out.insert(z, profiles[&za].blend(&profiles[&zb], t).polygon());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn circle(c: Point2, r: f64, m: usize) -> Vec<Point2> {
        (0..m)
            .map(|i| Point2::from_polar(c, r, TAU * i as f64 / m as f64))
            .collect()
    }

    #[test]
    fn identical_brackets_reproduce_the_contour() {
        let c = circle(Point2::new(20.0, 30.0), 8.0, 40);
        let mid = interpolate_contour(&c, &c, 0.5, 40).unwrap();
        for (a, b) in c.iter().zip(&mid) {
            assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn radius_blends_linearly() {
        let c = Point2::new(50.0, 50.0);
        // ray-aligned polygon vertices make the radial profile exact
        let mid = interpolate_contour(&circle(c, 10.0, 40), &circle(c, 20.0, 40), 0.5, 40).unwrap();
        for p in &mid {
            assert!((p.distance(c) - 15.0).abs() < 1e-6, "{}", p.distance(c));
        }
    }

    #[test]
    fn centers_blend_linearly() {
        let a = circle(Point2::new(0.0, 0.0), 5.0, 40);
        let b = circle(Point2::new(9.0, -3.0), 5.0, 40);
        let p = RadialProfile::of(&interpolate_contour(&a, &b, 1.0 / 3.0, 40).unwrap(), 40).unwrap();
        assert!(p.center.distance(Point2::new(3.0, -1.0)) < 1e-9);
    }

    #[test]
    fn fills_gaps_and_reports_orphans() {
        let mut known = BTreeMap::new();
        known.insert(2, circle(Point2::new(10.0, 10.0), 4.0, 12));
        known.insert(5, circle(Point2::new(10.0, 10.0), 7.0, 12));
        let filled = interpolate_gaps(&known, 2..=5, 12).unwrap();
        assert_eq!(filled.keys().copied().collect::<Vec<_>>(), vec![3, 4]);
        let r3 = filled[&3][0].distance(Point2::new(10.0, 10.0));
        assert!((r3 - 5.0).abs() < 1e-9);
        match interpolate_gaps(&known, 0..=6, 12) {
            Err(Error::Interpolation(orphans)) => assert_eq!(orphans, vec![0, 1, 6]),
            other => panic!("{other:?}"),
        }
    }
}
