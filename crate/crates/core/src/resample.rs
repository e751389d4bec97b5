//! Corner-aligned grid resampling shared by input preprocessing and CAM upsampling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Debugging aid; blocky output.
    Nearest,
}

fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    if dst == 1 || src == 1 {
        0.0
    } else {
        i as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Resamples a row-major `src_h x src_w` grid to `dst_h x dst_w`.
/// Output corners coincide with input corners.
pub fn resample(
    values: &[f32],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
    mode: Interpolation,
) -> Result<Vec<f32>> {
    if src_h == 0 || src_w == 0 || dst_h == 0 || dst_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot resample {src_h}x{src_w} to {dst_h}x{dst_w}"
        )));
    }
    if values.len() != src_h * src_w {
        return Err(Error::shape(
            "resample",
            format!("{} values for a {src_h}x{src_w} grid", values.len()),
        ));
    }
    let at = |y: usize, x: usize| values[y * src_w + x] as f64;
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for i in 0..dst_h {
        let sy = source_coord(i, src_h, dst_h);
        for j in 0..dst_w {
            let sx = source_coord(j, src_w, dst_w);
            let v = match mode {
                Interpolation::Nearest => at(sy.round() as usize, sx.round() as usize),
                Interpolation::Bilinear => {
                    let y0 = (sy.floor() as usize).min(src_h - 1);
                    let x0 = (sx.floor() as usize).min(src_w - 1);
                    let y1 = (y0 + 1).min(src_h - 1);
                    let x1 = (x0 + 1).min(src_w - 1);
                    let fy = sy - y0 as f64;
                    let fx = sx - x0 as f64;
                    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                    top * (1.0 - fy) + bottom * fy
                }
            };
            out.push(v as f32);
        }
    }
    Ok(out)
}
