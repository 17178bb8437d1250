//! Overlap and distance measures between binary masks, plus the mean/std
//! summaries used to aggregate them over datasets.

use crate::error::{Error, Result};
use crate::volume::{Grid3, MaskVolume};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

fn same_geometry(a: &MaskVolume, b: &MaskVolume) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::arg(format!(
            "mask geometries differ: {:?} @ {:?} vs {:?} @ {:?}",
            a.grid().sizes,
            a.grid().spacing,
            b.grid().sizes,
            b.grid().spacing
        )));
    }
    Ok(())
}

/// Dice similarity coefficient in percent. Two empty masks agree perfectly (100).
pub fn dsc(a: &MaskVolume, b: &MaskVolume) -> Result<f64> {
    same_geometry(a, b)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        na += x as usize;
        nb += y as usize;
        both += (x & y) as usize;
    }
    if na + nb == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * 2.0 * both as f64 / (na + nb) as f64)
}

/// Symmetric Hausdorff distance between the voxel-center sets, in voxel index
/// units (spacing is ignored).
pub fn hausdorff(a: &MaskVolume, b: &MaskVolume) -> Result<f64> {
    same_geometry(a, b)?;
    if a.count() == 0 || b.count() == 0 {
        return Err(Error::arg("Hausdorff distance needs two non-empty masks"));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

fn directed_hausdorff(from: &MaskVolume, to: &MaskVolume) -> f64 {
    let dist2 = squared_distance_transform(to);
    from.bits()
        .iter()
        .zip(&dist2)
        .filter(|(&bit, _)| bit != 0)
        .map(|(_, &d)| d)
        .fold(0.0, f64::max)
        .sqrt()
}

/// Exact squared Euclidean distance (voxel units) from every voxel to the
/// nearest foreground voxel, by separable lower envelopes of parabolas.
/// Voxels with no foreground anywhere get `f64::INFINITY`.
pub fn squared_distance_transform(mask: &MaskVolume) -> Vec<f64> {
    let [nx, ny, nz] = mask.grid().sizes;
    let mut d: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| if b != 0 { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Envelope::with_capacity(longest);

    let mut pass = |d: &mut Vec<f64>, len: usize, count: usize, index: &dyn Fn(usize, usize) -> usize| {
        for l in 0..count {
            for i in 0..len {
                line[i] = d[index(l, i)];
            }
            scratch.transform(&line[..len], &mut out[..len]);
            for i in 0..len {
                d[index(l, i)] = out[i];
            }
        }
    };
    pass(&mut d, nx, ny * nz, &|l, i| l * nx + i);
    pass(&mut d, ny, nx * nz, &|l, i| (l / nx) * nx * ny + i * nx + l % nx);
    pass(&mut d, nz, nx * ny, &|l, i| i * nx * ny + l);
    d
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    // out[q] = min_p (q - p)^2 + f[p] over finite f[p]
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            let qf = q as f64;
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let pf = p as f64;
                let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                if s <= *self.bounds.last().expect("one bound per site") {
                    self.sites.pop();
                    self.bounds.pop();
                    continue;
                }
                self.sites.push(q);
                self.bounds.push(s);
                break;
            }
        }
        if self.sites.is_empty() {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while k + 1 < self.sites.len() && self.bounds[k + 1] < qf {
                k += 1;
            }
            let p = self.sites[k];
            let diff = qf - p as f64;
            *o = diff * diff + f[p];
        }
    }
}

/// Set-voxel count and physical volume in cm^3 (spacing in mm).
pub fn volume_stats(mask: &MaskVolume) -> (usize, f64) {
    let count = mask.count();
    (count, count as f64 * voxel_volume_mm3(mask.grid()) / 1000.0)
}

fn voxel_volume_mm3(grid: &Grid3) -> f64 {
    grid.spacing.iter().product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::arg(format!(
            "standard deviation needs >= 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Summary {
        mean,
        std: var.sqrt(),
        min,
        max,
    })
}

/// Agreement between two segmentations of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub label: String,
    /// Percent.
    pub dsc: f64,
    /// Voxel units.
    pub hausdorff: f64,
    pub voxels_a: usize,
    pub voxels_b: usize,
    pub volume_a_cm3: f64,
    pub volume_b_cm3: f64,
}

impl OverlapReport {
    pub fn compare(label: impl Into<String>, a: &MaskVolume, b: &MaskVolume) -> Result<Self> {
        let (voxels_a, volume_a_cm3) = volume_stats(a);
        let (voxels_b, volume_b_cm3) = volume_stats(b);
        Ok(Self {
            label: label.into(),
            dsc: dsc(a, b)?,
            hausdorff: hausdorff(a, b)?,
            voxels_a,
            voxels_b,
            volume_a_cm3,
            volume_b_cm3,
        })
    }
}

/// Per-dataset rows followed by mean ± std, min and max rows.
pub fn format_table(reports: &[OverlapReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>14} {:>10} {:>10} {:>12} {:>12}",
        "Data set", "DSC (%)", "Hausdorff (vx)", "Voxels A", "Voxels B", "Vol A (cm3)", "Vol B (cm3)"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<12} {:>10.2} {:>14.2} {:>10} {:>10} {:>12.2} {:>12.2}",
            r.label, r.dsc, r.hausdorff, r.voxels_a, r.voxels_b, r.volume_a_cm3, r.volume_b_cm3
        );
    }
    let dscs: Vec<f64> = reports.iter().map(|r| r.dsc).collect();
    let hds: Vec<f64> = reports.iter().map(|r| r.hausdorff).collect();
    match (summarize(&dscs), summarize(&hds)) {
        (Ok(d), Ok(h)) => {
            let pm = |x: Summary| format!("{:.2} ± {:.2}", x.mean, x.std);
            let _ = writeln!(s, "{:<12} {:>14} {:>16}", "μ ± σ", pm(d), pm(h));
            let _ = writeln!(s, "{:<12} {:>10.2} {:>14.2}", "min", d.min, h.min);
            let _ = writeln!(s, "{:<12} {:>10.2} {:>14.2}", "max", d.max, h.max);
        }
        _ => {
            let _ = writeln!(s, "{:<12} {:>10} {:>14}", "μ ± σ", "n.a.", "n.a.");
        }
    }
    s
}
