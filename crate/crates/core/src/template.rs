//! Template polygons, seed points and the radial node grid spanned between them.
//!
//! Rays leave the seed at uniform angles, measured counter-clockwise from +x
//! in pixel space. Each ray ends where it last leaves the template; the nodes
//! of ray `i` sit at `seed + (j+1)/n * (IP_i - seed)` for `j = 0..n`, so the
//! outermost node lies on the template and the seed itself is not a node.

use crate::error::{Error, GeometryError, Result};
use crate::point::{point_in_polygon, signed_area, Point2};
use crate::volume::{Sampling, Slice2D};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Rays shorter than this (in pixels) would collapse their node column.
pub const MIN_RAY_LENGTH: f64 = 2.0;

/// Closed marker polygon on one slice; the last marker connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub markers: Vec<Point2>,
    pub z_index: usize,
}

impl Template {
    pub fn new(markers: Vec<Point2>, z_index: usize) -> Result<Self, GeometryError> {
        if markers.len() < 3 {
            return Err(GeometryError::TooFewMarkers(markers.len()));
        }
        if markers.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite("template marker"));
        }
        Ok(Self { markers, z_index })
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, &self.markers)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.markers).abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.markers.len();
        (0..n).map(move |i| (self.markers[i], self.markers[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub position: Point2,
    pub z_index: usize,
}

/// Area-weighted centroid of the polygon. Falls back to the vertex mean when
/// the enclosed area is numerically zero.
pub fn centroid(markers: &[Point2]) -> Result<Point2, GeometryError> {
    if markers.len() < 3 {
        return Err(GeometryError::TooFewMarkers(markers.len()));
    }
    let n = markers.len();
    // shift to the first vertex to keep the shoelace sums well conditioned
    let origin = markers[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = markers[i] - origin;
        let q = markers[(i + 1) % n] - origin;
        let w = p.cross(q);
        a2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    let extent = markers.iter().map(|m| m.distance(origin)).fold(0.0, f64::max);
    if a2.abs() <= 1e-12 * extent * extent.max(1.0) {
        let sum = markers.iter().fold(Point2::default(), |acc, &m| acc + m);
        return Ok(sum * (1.0 / n as f64));
    }
    Ok(origin + Point2::new(cx / (3.0 * a2), cy / (3.0 * a2)))
}

/// Scales every marker about `center` by `sf`.
pub fn scale_template(t: &Template, sf: f64, center: Point2) -> Result<Template> {
    if !(sf.is_finite() && sf > 0.0) {
        return Err(Error::arg(format!("scale factor must be positive, got {sf}")));
    }
    let markers = t.markers.iter().map(|&m| center + (m - center) * sf).collect();
    Ok(Template {
        markers,
        z_index: t.z_index,
    })
}

/// `k` uniform angles `2*pi*i/k` starting on the +x axis.
pub fn ray_angles(k: usize) -> Result<Vec<f64>> {
    if k < 3 {
        return Err(Error::arg(format!("need at least 3 rays, got {k}")));
    }
    Ok((0..k).map(|i| TAU * i as f64 / k as f64).collect())
}

/// Where the half-line from `seed` at `angle` leaves the polygon for the last
/// time. Concave templates can be crossed several times; the farthest
/// crossing keeps the whole template extent inside the node grid.
pub fn intersect_ray_polygon(seed: Point2, angle: f64, t: &Template) -> Result<Point2, GeometryError> {
    let dir = Point2::new(angle.cos(), angle.sin());
    let mut best: Option<f64> = None;
    for (a, b) in t.edges() {
        if let Some(s) = ray_segment_hit(seed, dir, a, b) {
            if best.is_none_or(|cur| s > cur) {
                best = Some(s);
            }
        }
    }
    match best {
        Some(s) if s > 0.0 => Ok(seed + dir * s),
        _ => Err(GeometryError::NoIntersection { angle }),
    }
}

// Ray parameter of the hit with segment a-b, if any.
fn ray_segment_hit(origin: Point2, dir: Point2, a: Point2, b: Point2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    let w = a - origin;
    if denom.abs() < 1e-15 {
        // parallel: a collinear edge is reached through its endpoints, which
        // the adjacent edges report
        return None;
    }
    let s = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    const EPS: f64 = 1e-12;
    (s > EPS && (-EPS..=1.0 + EPS).contains(&u)).then_some(s)
}

/// Rays cast from a seed to the template, one per uniform angle.
#[derive(Debug, Clone, PartialEq)]
pub struct RayFan {
    pub seed: SeedPoint,
    pub angles: Vec<f64>,
    pub hits: Vec<Point2>,
    pub lengths: Vec<f64>,
}

impl RayFan {
    pub fn cast(seed: SeedPoint, template: &Template, k: usize) -> Result<Self> {
        if !seed.position.is_finite() {
            return Err(GeometryError::NonFinite("seed point").into());
        }
        if !template.contains(seed.position) {
            return Err(GeometryError::SeedOutsideTemplate {
                x: seed.position.x,
                y: seed.position.y,
            }
            .into());
        }
        let angles = ray_angles(k)?;
        let mut hits = Vec::with_capacity(k);
        let mut lengths = Vec::with_capacity(k);
        for (ray, &angle) in angles.iter().enumerate() {
            let ip = intersect_ray_polygon(seed.position, angle, template)?;
            let length = ip.distance(seed.position);
            if length < MIN_RAY_LENGTH {
                return Err(GeometryError::DegenerateRay { ray, length }.into());
            }
            hits.push(ip);
            lengths.push(length);
        }
        Ok(Self {
            seed,
            angles,
            hits,
            lengths,
        })
    }

    pub fn k(&self) -> usize {
        self.angles.len()
    }
}

/// `k` rays x `n` nodes with positions and sampled grey values, row-major by ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGrid {
    pub k: usize,
    pub n: usize,
    pub seed: Point2,
    pub seed_grey: f64,
    pub positions: Vec<Point2>,
    pub grey: Vec<f64>,
}

impl NodeGrid {
    pub fn sample(fan: &RayFan, n: usize, slice: &Slice2D) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg(format!("need at least 2 nodes per ray, got {n}")));
        }
        let seed = fan.seed.position;
        let mut positions = Vec::with_capacity(fan.k() * n);
        for &ip in &fan.hits {
            positions.extend((0..n).map(|j| seed.lerp(ip, (j + 1) as f64 / n as f64)));
        }
        let grey = positions
            .iter()
            .map(|&p| slice.sample(p, Sampling::Bilinear))
            .collect::<Result<Vec<_>>>()?;
        let seed_grey = slice.sample(seed, Sampling::Bilinear)?;
        Ok(Self {
            k: fan.k(),
            n,
            seed,
            seed_grey,
            positions,
            grey,
        })
    }

    #[inline]
    pub fn position(&self, ray: usize, node: usize) -> Point2 {
        self.positions[ray * self.n + node]
    }

    #[inline]
    pub fn grey(&self, ray: usize, node: usize) -> f64 {
        self.grey[ray * self.n + node]
    }
}
