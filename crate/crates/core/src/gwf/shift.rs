//! Spectrum embedding and lateral band shifting.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, TsimError};
use crate::grid::{fft3_complex_inplace, ifft3_complex_inplace, signed_index, ComplexSpectrum, GridSpec};

/// Real-space origin used for the shift modulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Image coordinates, zero at voxel `n/2` (data bands).
    Centered,
    /// Kernel coordinates, zero at voxel 0 (OTFs).
    Signed,
}

/// Per-axis map from output bins to `(source bin, weight)`.
fn axis_map(n_in: usize, n_out: usize) -> Vec<Option<(usize, f64)>> {
    (0..n_out)
        .map(|j| {
            if n_in == n_out {
                return Some((j, 1.0));
            }
            let k = signed_index(j, n_out);
            let half = (n_in / 2) as i64;
            if k.abs() < half {
                Some((k.rem_euclid(n_in as i64) as usize, 1.0))
            } else if k.abs() == half {
                // The source Nyquist bin is split between ±n/2.
                Some((n_in / 2, 0.5))
            } else {
                None
            }
        })
        .collect()
}

fn same_extent(a: &GridSpec, b: &GridSpec) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
    close(a.nx as f64 * a.dx_vox, b.nx as f64 * b.dx_vox)
        && close(a.ny as f64 * a.dx_vox, b.ny as f64 * b.dx_vox)
        && close(a.nz as f64 * a.dz_vox, b.nz as f64 * b.dz_vox)
}

/// Zero-embeds a spectrum into a finer grid with the same physical extent.
///
/// Spectral values are kept, so the inverse transform on the output grid is
/// the band-limited interpolant of the input volume scaled by `N_in/N_out`.
pub fn embed_spectrum(s: &ComplexSpectrum, out: &GridSpec) -> Result<ComplexSpectrum> {
    let g = *s.grid();
    if out.nx < g.nx || out.ny < g.ny || out.nz < g.nz || !same_extent(&g, out) {
        return Err(TsimError::GridMismatch(format!(
            "cannot embed a {}x{}x{} spectrum into {}x{}x{} with a different extent",
            g.nx, g.ny, g.nz, out.nx, out.ny, out.nz
        )));
    }
    let (mx, my, mz) = (axis_map(g.nx, out.nx), axis_map(g.ny, out.ny), axis_map(g.nz, out.nz));
    let src = s.data();
    let plane = out.nx * out.ny;
    let mut data = vec![Complex64::new(0.0, 0.0); out.len()];
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        let Some((sz, wz)) = mz[z] else { return };
        for y in 0..out.ny {
            let Some((sy, wy)) = my[y] else { continue };
            let row = &mut slab[y * out.nx..(y + 1) * out.nx];
            for (x, v) in row.iter_mut().enumerate() {
                if let Some((sx, wx)) = mx[x] {
                    *v = src[g.index(sx, sy, sz)] * (wx * wy * wz);
                }
            }
        }
    });
    Ok(ComplexSpectrum::from_raw(*out, data))
}

/// Moves a band by `shift` (cycles/µm, lateral) onto `out`.
///
/// The band is zero-embedded into `out`, inverse transformed, multiplied by
/// `exp(+i2π·shift·x)` and transformed back, so the result at frequency `q`
/// is the input at `q − shift`. Any sub-voxel shift is allowed.
pub fn shift_band(
    d: &ComplexSpectrum,
    shift: (f64, f64),
    out: &GridSpec,
    origin: Origin,
) -> Result<ComplexSpectrum> {
    let g = *d.grid();
    let s_abs = shift.0.hypot(shift.1);
    let fits = if g.same_shape(out) {
        // Circular shift on the same grid.
        s_abs <= out.nyquist_lateral()
    } else {
        s_abs + g.nyquist_lateral() <= out.nyquist_lateral() * (1.0 + 1e-12)
    };
    if !fits {
        return Err(TsimError::config(
            "shift",
            format!(
                "|shift| {s_abs:.3} plus band Nyquist {:.3} exceeds output Nyquist {:.3} cycles/µm",
                g.nyquist_lateral(),
                out.nyquist_lateral()
            ),
        ));
    }
    let embedded = embed_spectrum(d, out)?;
    if shift == (0.0, 0.0) {
        return Ok(embedded);
    }
    let mut data = embedded.into_data();
    ifft3_complex_inplace(&mut data, out);

    let pos = |i: usize, n: usize, pitch: f64| -> f64 {
        let k = match origin {
            Origin::Centered => i as f64 - (n / 2) as f64,
            Origin::Signed => signed_index(i, n) as f64,
        };
        k * pitch * 1e-3
    };
    let tau = std::f64::consts::TAU;
    let px: Vec<Complex64> = (0..out.nx)
        .map(|x| Complex64::from_polar(1.0, tau * shift.0 * pos(x, out.nx, out.dx_vox)))
        .collect();
    let py: Vec<Complex64> = (0..out.ny)
        .map(|y| Complex64::from_polar(1.0, tau * shift.1 * pos(y, out.ny, out.dx_vox)))
        .collect();
    let plane = out.nx * out.ny;
    data.par_chunks_mut(plane).for_each(|slab| {
        for (y, row) in slab.chunks_mut(out.nx).enumerate() {
            for (v, e) in row.iter_mut().zip(&px) {
                *v *= e * py[y];
            }
        }
    });
    fft3_complex_inplace(&mut data, out);
    Ok(ComplexSpectrum::from_raw(*out, data))
}
