//! Even-odd scanline fill of contours into binary masks.
//!
//! A voxel is set iff its center lies inside the polygon under the even-odd
//! rule, with the same half-open edge convention as
//! [`point_in_polygon`](crate::point::point_in_polygon).

use crate::contour_set::ContourSet;
use crate::error::{Error, Result};
use crate::point::Point2;
use crate::volume::{Grid3, MaskVolume};

/// Sets every pixel of slice `z` whose center is inside `polygon`. Returns
/// the number of pixels set.
pub fn fill_polygon(mask: &mut MaskVolume, z: usize, polygon: &[Point2]) -> usize {
    let [nx, ny, _] = mask.grid().sizes;
    if polygon.len() < 3 {
        return 0;
    }
    let mut xs: Vec<f64> = Vec::with_capacity(polygon.len());
    let mut filled = 0;
    for row in 0..ny {
        let y = row as f64;
        xs.clear();
        for i in 0..polygon.len() {
            let a = polygon[i];
            let b = polygon[(i + 1) % polygon.len()];
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            // inside: span[0] <= x < span[1]
            let first = span[0].ceil().max(0.0);
            let end = span[1].ceil().min(nx as f64);
            if first >= end {
                continue;
            }
            for col in first as usize..end as usize {
                mask.set(col, row, z, true);
                filled += 1;
            }
        }
    }
    filled
}

/// Rasterizes every contour of the set into a mask on `grid`.
pub fn voxelize_contours(contours: &ContourSet, grid: Grid3) -> Result<MaskVolume> {
    let mut mask = MaskVolume::zeros(grid);
    for c in &contours.slices {
        if c.z >= grid.nz() {
            return Err(Error::Index {
                index: c.z as i64,
                len: grid.nz(),
            });
        }
        fill_polygon(&mut mask, c.z, &c.vertices);
    }
    Ok(mask)
}
