//! Grey-value volumes, axial slices and binary masks.
//!
//! Voxel order is x fastest, then y, then z: voxel `(x, y, z)` lives at
//! `x + y*nx + z*nx*ny`.

use crate::error::{Error, Result};
use crate::point::Point2;
use serde::{Deserialize, Serialize};

/// Voxel counts and physical spacing (mm per voxel) of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub sizes: [usize; 3],
    pub spacing: [f64; 3],
}

impl Grid3 {
    pub fn new(sizes: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::arg(format!("volume sizes must be >= 1, got {sizes:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::arg(format!("spacing must be positive, got {spacing:?}")));
        }
        sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::arg("volume too large"))?;
        Ok(Self { sizes, spacing })
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn nz(&self) -> usize {
        self.sizes[2]
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.sizes[0] * (y + self.sizes[1] * z)
    }

    pub fn check_z(&self, z: i64) -> Result<usize> {
        if z < 0 || z as usize >= self.nz() {
            return Err(Error::Index {
                index: z,
                len: self.nz(),
            });
        }
        Ok(z as usize)
    }
}

/// Scalar element type of a volume, matching the supported NRRD types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoxelType {
    Uint8,
    Int16,
    Float32,
}

impl VoxelType {
    pub fn byte_size(self) -> usize {
        match self {
            VoxelType::Uint8 => 1,
            VoxelType::Int16 => 2,
            VoxelType::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    Uint8(Vec<u8>),
    Int16(Vec<i16>),
    Float32(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::Uint8(v) => v.len(),
            VoxelData::Int16(v) => v.len(),
            VoxelData::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_type(&self) -> VoxelType {
        match self {
            VoxelData::Uint8(_) => VoxelType::Uint8,
            VoxelData::Int16(_) => VoxelType::Int16,
            VoxelData::Float32(_) => VoxelType::Float32,
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            VoxelData::Uint8(v) => v[i] as f64,
            VoxelData::Int16(v) => v[i] as f64,
            VoxelData::Float32(v) => v[i] as f64,
        }
    }
}

/// A 3D grey-value image.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    grid: Grid3,
    data: VoxelData,
}

impl Volume3D {
    pub fn new(grid: Grid3, data: VoxelData) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::arg(format!(
                "value count {} does not match {}x{}x{}",
                data.len(),
                grid.sizes[0],
                grid.sizes[1],
                grid.sizes[2]
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.grid.sizes
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data.get(self.grid.index(x, y, z))
    }

    /// Returns axial plane `z` as a standalone slice.
    pub fn extract_slice(&self, z: usize) -> Result<Slice2D> {
        let z = self.grid.check_z(z as i64)?;
        let n = self.grid.slice_len();
        let start = z * n;
        let values = (start..start + n).map(|i| self.data.get(i)).collect();
        Ok(Slice2D {
            z_index: z,
            sizes: [self.grid.sizes[0], self.grid.sizes[1]],
            spacing: [self.grid.spacing[0], self.grid.spacing[1]],
            values,
        })
    }
}

/// How [`Slice2D::sample`] interpolates between pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Nearest,
    #[default]
    Bilinear,
}

/// One axial plane of a [`Volume3D`], with grey values widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub z_index: usize,
    pub sizes: [usize; 2],
    pub spacing: [f64; 2],
    pub values: Vec<f64>,
}

impl Slice2D {
    pub fn new(z_index: usize, sizes: [usize; 2], spacing: [f64; 2], values: Vec<f64>) -> Result<Self> {
        if sizes[0] == 0 || sizes[1] == 0 || values.len() != sizes[0] * sizes[1] {
            return Err(Error::arg(format!(
                "slice of {}x{} cannot hold {} values",
                sizes[0],
                sizes[1],
                values.len()
            )));
        }
        Ok(Self {
            z_index,
            sizes,
            spacing,
            values,
        })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.values[x + y * self.sizes[0]]
    }

    /// Grey value at a continuous position. Points outside the image are
    /// clamped onto the border pixels.
    pub fn sample(&self, p: Point2, method: Sampling) -> Result<f64> {
        if !p.is_finite() {
            return Err(Error::arg(format!("non-finite sample point ({}, {})", p.x, p.y)));
        }
        let max_x = (self.sizes[0] - 1) as f64;
        let max_y = (self.sizes[1] - 1) as f64;
        let x = p.x.clamp(0.0, max_x);
        let y = p.y.clamp(0.0, max_y);
        Ok(match method {
            Sampling::Nearest => self.pixel(x.round() as usize, y.round() as usize),
            Sampling::Bilinear => {
                let (x0, fx) = split_cell(x, self.sizes[0]);
                let (y0, fy) = split_cell(y, self.sizes[1]);
                let x1 = (x0 + 1).min(self.sizes[0] - 1);
                let y1 = (y0 + 1).min(self.sizes[1] - 1);
                let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
                let top = lerp(self.pixel(x0, y0), self.pixel(x1, y0), fx);
                let bottom = lerp(self.pixel(x0, y1), self.pixel(x1, y1), fx);
                lerp(top, bottom, fy)
            }
        })
    }
}

// Lower cell index and fractional offset of a clamped coordinate; the last
// pixel is addressed as offset 1 within the second-to-last cell.
fn split_cell(c: f64, size: usize) -> (usize, f64) {
    if size == 1 {
        return (0, 0.0);
    }
    let i = (c.floor() as usize).min(size - 2);
    (i, c - i as f64)
}

/// Binary mask with the geometry of the volume it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    grid: Grid3,
    bits: Vec<u8>,
}

impl MaskVolume {
    pub fn zeros(grid: Grid3) -> Self {
        Self {
            bits: vec![0; grid.len()],
            grid,
        }
    }

    pub fn from_bits(grid: Grid3, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::arg(format!(
                "mask has {} values, grid needs {}",
                bits.len(),
                grid.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::arg("mask values must be 0 or 1"));
        }
        Ok(Self { grid, bits })
    }

    /// Any non-zero voxel becomes foreground.
    pub fn from_volume(vol: &Volume3D) -> Self {
        let bits = (0..vol.grid.len()).map(|i| u8::from(vol.data.get(i) != 0.0)).collect();
        Self { grid: vol.grid, bits }
    }

    pub fn to_volume(&self) -> Volume3D {
        Volume3D {
            grid: self.grid,
            data: VoxelData::Uint8(self.bits.clone()),
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.grid.index(x, y, z)] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, on: bool) {
        let i = self.grid.index(x, y, z);
        self.bits[i] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Voxel index triples of every foreground voxel, in storage order.
    pub fn foreground(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, _] = self.grid.sizes;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, _)| [i % nx, (i / nx) % ny, i / (nx * ny)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, nz: usize) -> Grid3 {
        Grid3::new([nx, ny, nz], [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn extract_last_slice() {
        let vol = Volume3D::new(grid(2, 2, 2), VoxelData::Uint8((0..8).collect())).unwrap();
        let s = vol.extract_slice(1).unwrap();
        assert_eq!(s.values, vec![4.0, 5.0, 6.0, 7.0]);
        assert!(matches!(vol.extract_slice(2), Err(Error::Index { index: 2, len: 2 })));
    }

    proptest::proptest! {
        #[test]
        fn bilinear_reproduces_affine_images(
            a in -50.0f64..50.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            px in 0.0f64..9.0, py in 0.0f64..6.0,
        ) {
            let (nx, ny) = (10, 7);
            let values = (0..nx * ny).map(|i| a + b * (i % nx) as f64 + c * (i / nx) as f64).collect();
            let s = Slice2D::new(0, [nx, ny], [1.0, 1.0], values).unwrap();
            let got = s.sample(Point2::new(px, py), Sampling::Bilinear).unwrap();
            proptest::prop_assert!((got - (a + b * px + c * py)).abs() < 1e-9);
        }
    }

    #[test]
    fn slices_partition_the_volume() {
        let vol = Volume3D::new(grid(3, 4, 5), VoxelData::Int16((0..60).collect())).unwrap();
        let total: usize = (0..5).map(|z| vol.extract_slice(z).unwrap().values.len()).sum();
        assert_eq!(total, vol.grid().len());
    }

    #[test]
    fn sample_midpoint_and_constant() {
        let s = Slice2D::new(0, [2, 1], [1.0, 1.0], vec![0.0, 10.0]).unwrap();
        assert_eq!(s.sample(Point2::new(0.5, 0.0), Sampling::Bilinear).unwrap(), 5.0);
        let c = Slice2D::new(0, [3, 3], [1.0, 1.0], vec![7.0; 9]).unwrap();
        for p in [Point2::new(0.3, 1.7), Point2::new(-4.0, 9.0), Point2::new(2.0, 2.0)] {
            assert_eq!(c.sample(p, Sampling::Bilinear).unwrap(), 7.0);
            assert_eq!(c.sample(p, Sampling::Nearest).unwrap(), 7.0);
        }
    }

    #[test]
    fn sample_clamps_and_rejects_nan() {
        let s = Slice2D::new(0, [2, 2], [1.0, 1.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.sample(Point2::new(-3.0, -3.0), Sampling::Bilinear).unwrap(), 1.0);
        assert_eq!(s.sample(Point2::new(9.0, 9.0), Sampling::Nearest).unwrap(), 4.0);
        assert!(s.sample(Point2::new(f64::NAN, 0.0), Sampling::Bilinear).is_err());
    }

    #[test]
    fn single_pixel_slice() {
        let s = Slice2D::new(0, [1, 1], [1.0, 1.0], vec![3.0]).unwrap();
        assert_eq!(s.sample(Point2::new(0.2, -0.4), Sampling::Bilinear).unwrap(), 3.0);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(Grid3::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(Grid3::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        assert!(Volume3D::new(grid(2, 2, 1), VoxelData::Uint8(vec![0; 3])).is_err());
        assert!(MaskVolume::from_bits(grid(1, 1, 1), vec![2]).is_err());
    }

    #[test]
    fn mask_foreground_coordinates() {
        let mut m = MaskVolume::zeros(grid(3, 2, 2));
        m.set(2, 1, 1, true);
        m.set(0, 1, 0, true);
        let fg: Vec<_> = m.foreground().collect();
        assert_eq!(fg, vec![[0, 1, 0], [2, 1, 1]]);
        assert_eq!(m.count(), 2);
    }
}
