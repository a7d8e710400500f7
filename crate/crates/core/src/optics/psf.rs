//! Aberration-free scalar PSF (Gibson–Lanni model under design conditions).
//!
//! With matched coverslip and immersion the optical path difference reduces
//! to the defocus term, so the amplitude at lateral radius `r` and defocus `z`
//! is the pupil integral
//!
//! ```text
//! a(r, z) = ∫₀¹ J₀(2π·(NA/λ)·r·ρ) · exp(i·2π·z·(sqrt(n² − NA²ρ²) − n)/λ) · ρ dρ
//! ```
//!
//! `defocus_amplitude` evaluates it by adaptive Simpson quadrature. The
//! volume PSF uses the equivalent angular-spectrum form, one 2D FFT per
//! plane. The intensity PSF is `|a|²`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{axial_cutoff, check_nyquist, OpticalConfig};
use crate::error::Result;
use crate::grid::fft::{fft2_planes, Direction};
use crate::grid::{signed_index, GridSpec, RealVolume};

/// Relative tolerance of the radial quadrature.
pub const PSF_QUAD_TOL: f64 = 1e-8;

fn simpson_adaptive<F>(f: &F, a: f64, b: f64, fa: Complex64, fm: Complex64, fb: Complex64, whole: Complex64, tol: f64, depth: u32) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over `[a, b]` for a complex integrand.
///
/// The interval is pre-split into `pieces` panels so oscillatory integrands
/// cannot fool the first error estimate.
fn integrate<F>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = h / 6.0 * (fa + 4.0 * fm + fb);
            simpson_adaptive(&f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Complex field amplitude at radius `r_nm` and defocus `z_nm`.
///
/// At focus this reduces to the Airy amplitude `J₁(v)/v` with `v = 2π·NA·r/λ`.
pub fn defocus_amplitude(cfg: &OpticalConfig, r_nm: f64, z_nm: f64) -> Complex64 {
    let lambda = cfg.lambda_em;
    let radial = std::f64::consts::TAU * cfg.na * r_nm / lambda;
    let axial = std::f64::consts::TAU * z_nm / lambda;
    let (n, na) = (cfg.n_imm, cfg.na);
    let integrand = |rho: f64| {
        let phase = axial * ((n * n - na * na * rho * rho).sqrt() - n);
        libm::j0(radial * rho) * rho * Complex64::from_polar(1.0, phase)
    };
    // Oscillation count across the pupil sets the initial panel count.
    let w_span = (n - (n * n - na * na).sqrt()) / lambda * z_nm.abs();
    let cycles = (cfg.na * r_nm / lambda).abs() + w_span;
    let pieces = 4 + (4.0 * cycles).ceil() as usize;
    // Amplitude scale is a(0, 0) = 1/2.
    integrate(integrand, 0.0, 1.0, pieces, 0.5 * PSF_QUAD_TOL)
}

/// Intensity PSF centred at voxel `(0, 0, 0)` (DFT order), normalized to unit sum.
///
/// Each axial plane is the 2D inverse transform of the defocused pupil sampled
/// on the grid's own lateral frequency lattice, so the field is periodic over
/// the grid (matching FFT convolution) and the lateral OTF support never
/// exceeds `2·NA/λ`.
pub fn generate_psf(cfg: &OpticalConfig, grid: &GridSpec) -> Result<RealVolume> {
    cfg.validate()?;
    grid.validate()?;
    check_nyquist(cfg, grid, axial_cutoff(cfg)?)?;

    let (nx, ny) = (grid.nx, grid.ny);
    let plane = nx * ny;
    let (n, lambda) = (cfg.n_imm, cfg.lambda_em);
    let k_pupil = cfg.na / lambda;
    let k_medium = n / lambda;
    // Pupil frequencies in cycles/nm, with the defocus rate per nm of z.
    let pupil: Vec<(usize, f64)> = (0..plane)
        .filter_map(|i| {
            let kx = signed_index(i % nx, nx) as f64 / (nx as f64 * grid.dx_vox);
            let ky = signed_index(i / nx, ny) as f64 / (ny as f64 * grid.dx_vox);
            let k2 = kx * kx + ky * ky;
            (k2 <= k_pupil * k_pupil).then(|| (i, (k_medium * k_medium - k2).sqrt() - k_medium))
        })
        .collect();

    // h(x, y, -z) == h(x, y, z): one plane per distinct |z|.
    let n_planes = grid.nz / 2 + 1;
    let mut field = vec![Complex64::new(0.0, 0.0); n_planes * plane];
    field
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(iz, slab)| {
            let z = iz as f64 * grid.dz_vox;
            for &(i, w) in &pupil {
                slab[i] = Complex64::from_polar(1.0, std::f64::consts::TAU * z * w);
            }
        });
    fft2_planes(&mut field, nx, ny, Direction::Inverse);

    let mut data = vec![0.0; grid.len()];
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        let iz = signed_index(z, grid.nz).unsigned_abs() as usize;
        let src = &field[iz * plane..(iz + 1) * plane];
        for (d, a) in slab.iter_mut().zip(src) {
            *d = a.norm_sqr();
        }
    });
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    RealVolume::new(*grid, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fft3, freq_axes};
    use crate::optics::{generate_otf, lateral_cutoff};

    #[test]
    fn in_focus_amplitude_is_airy() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        for r in [0.0, 37.0, 120.0, 231.0, 480.0, 1500.0] {
            let v = std::f64::consts::TAU * cfg.na * r / cfg.lambda_em;
            let want = if r == 0.0 { 0.5 } else { libm::j1(v) / v };
            let got = defocus_amplitude(&cfg, r, 0.0);
            assert!((got.re - want).abs() < 1e-8, "r = {r}: {} vs {want}", got.re);
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn on_axis_defocus_matches_closed_form() {
        // On axis J0 = 1 and the integral has a closed form after substituting
        // s = sqrt(n² − NA²ρ²): a = ∫ s·exp(ik(s − n)) ds / NA² over [c, n].
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let (n, na) = (cfg.n_imm, cfg.na);
        let c = (n * n - na * na).sqrt();
        for z in [150.0, 800.0, 2400.0] {
            let k = std::f64::consts::TAU * z / cfg.lambda_em;
            let prim = |s: f64| {
                let e = Complex64::from_polar(1.0, k * (s - n));
                e * (Complex64::new(0.0, -s / k) + 1.0 / (k * k))
            };
            let want = (prim(n) - prim(c)) / (na * na);
            let got = defocus_amplitude(&cfg, 0.0, z);
            assert!((got - want).norm() < 1e-8, "z = {z}");
        }
    }

    #[test]
    fn psf_normalization_and_symmetry() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let grid = GridSpec::new(32, 32, 16, 40.0, 80.0).unwrap();
        let h = generate_psf(&cfg, &grid).unwrap();
        assert!(h.min() >= 0.0);
        assert!((h.sum() - 1.0).abs() < 1e-9);
        let peak = h.max();
        assert_eq!(h.get(0, 0, 0), peak);
        for z in 0..grid.nz {
            for y in 0..grid.ny {
                for x in 0..grid.nx {
                    let m = h.get((grid.nx - x) % grid.nx, (grid.ny - y) % grid.ny, z);
                    assert!((h.get(x, y, z) - m).abs() <= 1e-9 * peak);
                    let mz = h.get(x, y, (grid.nz - z) % grid.nz);
                    assert!((h.get(x, y, z) - mz).abs() <= 1e-9 * peak);
                    let swapped = h.get(y, x, z);
                    assert!((h.get(x, y, z) - swapped).abs() <= 1e-9 * peak);
                }
            }
        }
    }

    #[test]
    fn undersampled_grid_rejected() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let grid = GridSpec::new(16, 16, 16, 120.0, 40.0).unwrap();
        let err = generate_psf(&cfg, &grid).unwrap_err();
        assert!(err.to_string().contains("lateral"));
        let grid = GridSpec::new(16, 16, 16, 40.0, 400.0).unwrap();
        let err = generate_psf(&cfg, &grid).unwrap_err();
        assert!(err.to_string().contains("axial"));
    }

    #[test]
    fn otf_is_hermitian_with_unit_dc() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let grid = GridSpec::new(32, 32, 32, 40.0, 40.0).unwrap();
        let otf = generate_otf(&cfg, &grid).unwrap();
        assert_eq!(otf.data()[0].re, 1.0);
        assert!(otf.hermitian_asymmetry() < 1e-9);
    }

    #[test]
    fn otf_lateral_support_is_bounded() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let grid = GridSpec::cubic(128, 40.0).unwrap();
        let h = generate_psf(&cfg, &grid).unwrap();
        let s = fft3(&h).unwrap();
        let ax = freq_axes(&grid);
        let uc = lateral_cutoff(&cfg);
        let peak = s.peak_abs();
        let mut worst: f64 = 0.0;
        for (i, c) in s.data().iter().enumerate() {
            let (x, y, _) = grid.coords(i);
            if ax.x[x].hypot(ax.y[y]) > 1.05 * uc {
                worst = worst.max(c.norm() / peak);
            }
        }
        assert!(worst < 1e-4, "out-of-band OTF {worst:.2e}");
    }

    #[test]
    fn focal_plane_matches_airy_pattern() {
        let cfg = OpticalConfig::standard(0.75, 2.7);
        let grid = GridSpec::new(128, 128, 16, 20.0, 80.0).unwrap();
        let h = generate_psf(&cfg, &grid).unwrap();
        let peak = h.get(0, 0, 0);
        for x in 1..12 {
            let r = x as f64 * grid.dx_vox;
            let want = (defocus_amplitude(&cfg, r, 0.0).norm_sqr()) / 0.25;
            let got = h.get(x, 0, 0) / peak;
            assert!((got - want).abs() < 2e-2, "x = {x}: {got} vs {want}");
        }
        // Defocused on-axis falloff follows the quadrature as well.
        for z in 1..4 {
            let want = defocus_amplitude(&cfg, 0.0, z as f64 * grid.dz_vox).norm_sqr() / 0.25;
            let got = h.get(0, 0, z) / peak;
            assert!((got - want).abs() < 2e-2, "z = {z}: {got} vs {want}");
        }
    }
}
