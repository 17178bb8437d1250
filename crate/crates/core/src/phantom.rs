//! Synthetic tube phantoms with exact ground truth.
//!
//! A voxel belongs to the tube iff its center lies within `radius(z)` of
//! `center(z)`. The grey volume is `foreground` inside, `background` outside,
//! plus optional Gaussian noise drawn from a seeded generator.

use crate::error::{Error, Result};
use crate::graph_cut::GraphParams;
use crate::point::Point2;
use crate::session::{Direction, EventKind, ReplayLog};
use crate::volume::{Grid3, MaskVolume, Volume3D, VoxelData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

pub const MIN_RADIUS: f64 = 3.0;

/// Tube axis: `base + amplitude * (sin(theta), sin(theta + pi/2))` with `theta = 2 pi z / period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub base: Point2,
    pub amplitude: [f64; 2],
    /// Drift period in slices.
    pub period: f64,
}

impl Centerline {
    pub fn at(&self, z: usize) -> Point2 {
        let theta = TAU * z as f64 / self.period;
        Point2::new(
            self.base.x + self.amplitude[0] * theta.sin(),
            self.base.y + self.amplitude[1] * (theta + FRAC_PI_2).sin(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadiusProfile {
    Constant {
        radius: f64,
    },
    /// Linear from `start` at slice 0 to `end` at the last slice.
    Cone {
        start: f64,
        end: f64,
    },
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub sizes: [usize; 3],
    pub spacing: [f64; 3],
    pub centerline: Centerline,
    pub radius: RadiusProfile,
    pub foreground: f64,
    pub background: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    /// 128x128x24 at 1x1x3 mm: cone of radius 10 to 16, drifting 8 voxels
    /// per axis over one period, grey 200 on 50.
    pub fn acceptance(noise_sigma: f64) -> Self {
        Self {
            sizes: [128, 128, 24],
            spacing: [1.0, 1.0, 3.0],
            centerline: Centerline {
                base: Point2::new(64.0, 64.0),
                amplitude: [8.0, 8.0],
                period: 24.0,
            },
            radius: RadiusProfile::Cone { start: 10.0, end: 16.0 },
            foreground: 200.0,
            background: 50.0,
            noise_sigma,
            seed: 7,
        }
    }

    pub fn radius_at(&self, z: usize) -> f64 {
        match self.radius {
            RadiusProfile::Constant { radius } => radius,
            RadiusProfile::Cone { start, end } => {
                let last = self.sizes[2].saturating_sub(1).max(1) as f64;
                start + (end - start) * z as f64 / last
            }
            RadiusProfile::Sinusoidal {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (TAU * z as f64 / period).sin(),
        }
    }

    pub fn validate(&self) -> Result<Grid3> {
        let grid = Grid3::new(self.sizes, self.spacing).map_err(|e| Error::Spec(e.to_string()))?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Spec(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.foreground.is_finite() && self.background.is_finite()) {
            return Err(Error::Spec("grey levels must be finite".into()));
        }
        if !(self.centerline.period.is_finite() && self.centerline.period != 0.0) || !self.centerline.base.is_finite() {
            return Err(Error::Spec("centerline needs a finite base and non-zero period".into()));
        }
        let [nx, ny, nz] = self.sizes;
        for z in 0..nz {
            let r = self.radius_at(z);
            if !(r.is_finite() && r >= MIN_RADIUS) {
                return Err(Error::Spec(format!("radius {r:.3} on slice {z} is below {MIN_RADIUS}")));
            }
            let c = self.centerline.at(z);
            if c.x - r < 0.0 || c.y - r < 0.0 || c.x + r > (nx - 1) as f64 || c.y + r > (ny - 1) as f64 {
                return Err(Error::Spec(format!("tube leaves the volume on slice {z}")));
            }
        }
        Ok(grid)
    }

    /// Analytic cross-section of slice `z` as a `k`-gon.
    pub fn cross_section(&self, z: usize, k: usize) -> Vec<Point2> {
        let (c, r) = (self.centerline.at(z), self.radius_at(z));
        (0..k)
            .map(|i| Point2::from_polar(c, r, TAU * i as f64 / k as f64))
            .collect()
    }

    /// Grey volume and ground-truth mask.
    pub fn generate(&self) -> Result<(Volume3D, MaskVolume)> {
        let grid = self.validate()?;
        let [nx, ny, nz] = self.sizes;
        let mut truth = MaskVolume::zeros(grid);
        let mut values = Vec::with_capacity(grid.len());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| Error::Spec(e.to_string()))?;
        for z in 0..nz {
            let (c, r) = (self.centerline.at(z), self.radius_at(z));
            for y in 0..ny {
                for x in 0..nx {
                    let inside = Point2::new(x as f64, y as f64).distance(c) <= r;
                    if inside {
                        truth.set(x, y, z, true);
                    }
                    let base = if inside { self.foreground } else { self.background };
                    let grey = if self.noise_sigma > 0.0 {
                        base + noise.sample(&mut rng)
                    } else {
                        base
                    };
                    values.push(grey as f32);
                }
            }
        }
        Ok((Volume3D::new(grid, VoxelData::Float32(values))?, truth))
    }

    /// Replay log of a scripted session: the user outlines slice 0 with a
    /// circle `outline_scale` times the true radius about the true center,
    /// then advances by `skip` slices (the last step shortened to land on the
    /// final slice) and finalizes.
    pub fn scripted_replay(&self, skip: usize, outline_scale: f64, params: GraphParams) -> ReplayLog {
        let nz = self.sizes[2];
        let c = self.centerline.at(0);
        let r = self.radius_at(0) * outline_scale;
        let template = (0..params.k.max(32))
            .map(|i| Point2::from_polar(c, r, TAU * i as f64 / params.k.max(32) as f64))
            .collect();
        let mut events = vec![EventKind::Start {
            z0: 0,
            template,
            seed: c,
            params,
        }];
        let mut z = 0;
        while z + 1 < nz {
            let step = skip.max(1).min(nz - 1 - z);
            events.push(EventKind::AcceptAndAdvance {
                direction: Direction::Up,
                skip: step,
                params: None,
            });
            z += step;
        }
        events.push(EventKind::Finalize);
        ReplayLog::from_kinds("phantom", events)
    }
}
