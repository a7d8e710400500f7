use rayon::prelude::*;

use crate::error::{Result, TsimError};
use crate::grid::RealVolume;

/// Side length of the cubic SSIM window.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Mean squared difference over voxels.
pub fn mse(a: &RealVolume, b: &RealVolume) -> Result<f64> {
    a.grid().ensure_same(b.grid(), "mse operand")?;
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// Sliding sums of width `w` along a strided 1D line: `out[i] = Σ src[i..i+w]`.
fn running(src: &[f64], w: usize, out: &mut [f64]) {
    let mut acc: f64 = src[..w].iter().sum();
    out[0] = acc;
    for i in 1..out.len() {
        acc += src[i + w - 1] - src[i - 1];
        out[i] = acc;
    }
}

/// Valid-window box sums over x and y of one plane.
fn box_plane(plane: &[f64], nx: usize, ny: usize, w: usize) -> Vec<f64> {
    let (ox, oy) = (nx - w + 1, ny - w + 1);
    let mut rows = vec![0.0; ox * ny];
    for y in 0..ny {
        running(&plane[y * nx..(y + 1) * nx], w, &mut rows[y * ox..(y + 1) * ox]);
    }
    let mut out = vec![0.0; ox * oy];
    let mut col = vec![0.0; ny];
    let mut sums = vec![0.0; oy];
    for x in 0..ox {
        for y in 0..ny {
            col[y] = rows[y * ox + x];
        }
        running(&col, w, &mut sums);
        for y in 0..oy {
            out[y * ox + x] = sums[y];
        }
    }
    out
}

/// 3D SSIM over all valid 7³ windows with uniform weights, in percent.
///
/// The dynamic range is `max(max(a), max(b))`, which keeps the index
/// symmetric in its arguments.
pub fn ssim(a: &RealVolume, b: &RealVolume) -> Result<f64> {
    let g = *a.grid();
    g.ensure_same(b.grid(), "ssim operand")?;
    let w = SSIM_WINDOW;
    if g.nx < w || g.ny < w || g.nz < w {
        return Err(TsimError::InvalidGrid(format!("SSIM needs at least {w} voxels per axis")));
    }
    let range = a.max().max(b.max());
    if !(range > 0.0) {
        return Err(TsimError::Numerical("SSIM of non-positive volumes is undefined".into()));
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let plane = nx * ny;
    let (ox, oy, oz) = (nx - w + 1, ny - w + 1, nz - w + 1);

    // Per-plane 2D box sums of a, b, a², b², ab.
    let planes: Vec<[Vec<f64>; 5]> = (0..nz)
        .into_par_iter()
        .map(|z| {
            let pa = &a.data()[z * plane..(z + 1) * plane];
            let pb = &b.data()[z * plane..(z + 1) * plane];
            let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
                let v: Vec<f64> = pa.iter().zip(pb).map(|(&x, &y)| f(x, y)).collect();
                box_plane(&v, nx, ny, w)
            };
            [
                box_plane(pa, nx, ny, w),
                box_plane(pb, nx, ny, w),
                prod(&|x, _| x * x),
                prod(&|_, y| y * y),
                prod(&|x, y| x * y),
            ]
        })
        .collect();

    let n = (w * w * w) as f64;
    // Per-slab partial sums are added in order so the result does not depend
    // on the thread count.
    let partial: Vec<f64> = (0..oz)
        .into_par_iter()
        .map(|z0| {
            let mut acc = 0.0;
            for i in 0..ox * oy {
                let mut s = [0.0; 5];
                for p in &planes[z0..z0 + w] {
                    for (k, sk) in s.iter_mut().enumerate() {
                        *sk += p[k][i];
                    }
                }
                let (ma, mb) = (s[0] / n, s[1] / n);
                let va = s[2] / n - ma * ma;
                let vb = s[3] / n - mb * mb;
                let cov = s[4] / n - ma * mb;
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
            acc
        })
        .collect();
    let total: f64 = partial.iter().sum();
    Ok(100.0 * total / (ox * oy * oz) as f64)
}
