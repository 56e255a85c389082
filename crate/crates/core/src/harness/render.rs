//! Grayscale PNG montages.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{invalid, Error, Result};
use crate::grid::ImageVolume;

/// Columns of background between tiles.
pub const GUTTER: u32 = 4;

fn gray(v: f64, lo: f64, hi: f64) -> u8 {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Central slices of `images` side by side, linearly windowed to `[lo, hi]`.
/// Row 0 of the raster is the largest `y`.
pub fn panel(images: &[&ImageVolume], window: [f64; 2]) -> Result<GrayImage> {
    let [lo, hi] = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("window [{lo}, {hi}] must be finite with lo < hi")));
    }
    let first = images.first().ok_or_else(|| invalid("no images to render"))?;
    let d = first.dims;
    for img in images {
        img.dims.check_same(&d, "panel tiles")?;
    }
    let (w, h) = (d.nx as u32, d.ny as u32);
    let n = images.len() as u32;
    let mut out = GrayImage::new(n * w + (n - 1) * GUTTER, h);
    let k = d.nz / 2;
    for (t, img) in images.iter().enumerate() {
        let x0 = t as u32 * (w + GUTTER);
        for j in 0..d.ny {
            for i in 0..d.nx {
                let g = gray(img.get(i, j, k), lo, hi);
                out.put_pixel(x0 + i as u32, h - 1 - j as u32, Luma([g]));
            }
        }
    }
    Ok(out)
}

pub fn render_panel(images: &[&ImageVolume], window: [f64; 2], path: &Path) -> Result<()> {
    let img = panel(images, window)?;
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    super::io::write_atomic(path, &bytes)
}
