//! Windowed 8-bit PNG rendering of slices for display.

use crate::error::{ApiError, ApiResult};
use radcut_core::volume::Slice2D;

/// `lo..hi` maps linearly onto `0..=255`, clamped outside.
pub fn window_to_u8(values: &[f64], lo: f64, hi: f64) -> ApiResult<Vec<u8>> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(ApiError::invalid(
            "invalid-argument",
            format!("window needs lo < hi, got {lo},{hi}"),
        ));
    }
    Ok(values
        .iter()
        .map(|&v| (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8)
        .collect())
}

/// Full grey range of the slice; a constant slice gets a unit-wide window.
pub fn default_window(slice: &Slice2D) -> (f64, f64) {
    let lo = slice.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slice.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

pub fn encode_png(width: usize, height: usize, grey: &[u8]) -> ApiResult<Vec<u8>> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| ApiError::internal(format!("png header: {e}")))?;
    writer
        .write_image_data(grey)
        .map_err(|e| ApiError::internal(format!("png data: {e}")))?;
    writer
        .finish()
        .map_err(|e| ApiError::internal(format!("png finish: {e}")))?;
    Ok(out)
}
