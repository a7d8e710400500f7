//! Image-quality metrics, arc profiles, achieved resolution and spectral support.

mod arc;
mod ssim;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::forward::PhantomSpec;
use crate::grid::{fft3, freq_axes, l2_normalize_clamp, resample_trilinear, RealVolume};
use crate::optics::{predict_resolution, OpticalConfig};

pub use arc::{
    arc_profile, volume_center, AchievedResolution, ArcProfile, Plane, ResolutionSearch, DEFAULT_CRITERION,
    SAMPLES_PER_DEG,
};
pub use ssim::{mse, ssim, SSIM_K1, SSIM_K2, SSIM_WINDOW};

/// Relative threshold used for spectral-support extents.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Highest lateral radius and axial frequency (cycles/µm) with significant magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSupport {
    pub lateral: f64,
    pub axial: f64,
}

/// Support extents of `|fft3(v)|` at `threshold_rel` times the largest non-DC magnitude.
pub fn spectral_support(v: &RealVolume, threshold_rel: f64) -> Result<SpectralSupport> {
    let s = fft3(v)?;
    let g = *v.grid();
    let ax = freq_axes(&g);
    let peak = s.data()[1..].par_iter().map(|c| c.norm()).reduce(|| 0.0, f64::max);
    let thr = threshold_rel * peak;
    let (lateral, axial) = s
        .data()
        .par_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| peak > 0.0 && c.norm() >= thr)
        .map(|(i, _)| {
            let (x, y, z) = g.coords(i);
            (ax.x[x].hypot(ax.y[y]), ax.z[z].abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(SpectralSupport { lateral, axial })
}

/// Quality and resolution summary of one restoration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub mse: f64,
    pub ssim_pct: f64,
    /// `None` when the peak-to-valley criterion is never met.
    pub achieved_lateral_nm: Option<f64>,
    pub achieved_axial_nm: Option<f64>,
    pub theoretical_lateral_nm: f64,
    pub theoretical_axial_nm: f64,
    /// Shortfall of the achieved resolution relative to the theoretical value.
    pub reduction_lateral_pct: Option<f64>,
    pub reduction_axial_pct: Option<f64>,
    pub support_lateral: f64,
    pub support_axial: f64,
}

/// Clamps and ℓ2-normalizes both volumes, resampling `truth` onto the
/// restoration grid when needed.
pub fn prepare_pair(truth: &RealVolume, restored: &RealVolume) -> Result<(RealVolume, RealVolume)> {
    let t = if truth.grid() == restored.grid() {
        truth.clone()
    } else {
        resample_trilinear(truth, *restored.grid())?
    };
    Ok((l2_normalize_clamp(&t)?, l2_normalize_clamp(restored)?))
}

fn search(v: &RealVolume, phantom: &PhantomSpec, plane: Plane, start: f64) -> Result<Option<f64>> {
    match ResolutionSearch::new(phantom, plane, start).run(v) {
        Ok(r) => Ok(Some(r.d_nm)),
        Err(TsimError::CriterionNotMet { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Full assessment of `restored` against `truth`.
///
/// Resolution searches start at the theoretical TSIM spacings; `support_from`
/// is the volume whose spectrum is measured (usually the unclamped
/// recombination output).
pub fn evaluate(
    truth: &RealVolume,
    restored: &RealVolume,
    support_from: &RealVolume,
    phantom: &PhantomSpec,
    optics: &OpticalConfig,
) -> Result<AssessmentReport> {
    let (t, r) = prepare_pair(truth, restored)?;
    let pred = predict_resolution(optics)?;
    let lat = search(&r, phantom, Plane::XY, pred.dx_sim)?;
    let axi = search(&r, phantom, Plane::XZ, pred.dz_sim)?;
    let pct = |d: Option<f64>, th: f64| d.map(|d| 100.0 * (d / th - 1.0));
    let support = spectral_support(support_from, SUPPORT_THRESHOLD)?;
    Ok(AssessmentReport {
        mse: mse(&t, &r)?,
        ssim_pct: ssim(&t, &r)?,
        achieved_lateral_nm: lat,
        achieved_axial_nm: axi,
        theoretical_lateral_nm: pred.dx_sim,
        theoretical_axial_nm: pred.dz_sim,
        reduction_lateral_pct: pct(lat, pred.dx_sim),
        reduction_axial_pct: pct(axi, pred.dz_sim),
        support_lateral: support.lateral,
        support_axial: support.axial,
    })
}

/// `angle_deg,intensity` rows.
pub fn profile_csv(p: &ArcProfile) -> String {
    let mut s = String::from("angle_deg,intensity\n");
    for (a, v) in &p.samples {
        let _ = writeln!(s, "{a:.4},{v:.9}");
    }
    s
}

pub fn write_profile_csv(path: &Path, p: &ArcProfile) -> Result<()> {
    fs::write(path, profile_csv(p)).map_err(|e| TsimError::io(path, e))
}

/// A 2D image extracted for display.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Binary 16-bit PGM (big-endian samples), linearly scaled so the maximum maps to 65535.
pub fn pgm16(section: &Section) -> Vec<u8> {
    let max = section.pixels.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut out = format!("P5\n{} {}\n65535\n", section.width, section.height).into_bytes();
    for &v in &section.pixels {
        let q = if max > 0.0 { (v.max(0.0) / max * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn write_pgm16(path: &Path, section: &Section) -> Result<()> {
    fs::write(path, pgm16(section)).map_err(|e| TsimError::io(path, e))
}

/// XY and XZ mid-sections of `v` plus `log(1+|F|)` sections of its spectrum
/// through the origin, with the zero frequency moved to the image centre.
pub fn sections(v: &RealVolume, prefix: &str) -> Result<Vec<Section>> {
    let g = *v.grid();
    let (cy, cz) = (g.ny / 2, g.nz / 2);
    let xy: Vec<f64> = (0..g.ny)
        .flat_map(|y| (0..g.nx).map(move |x| (x, y)))
        .map(|(x, y)| v.get(x, y, cz))
        .collect();
    let xz: Vec<f64> = (0..g.nz)
        .flat_map(|z| (0..g.nx).map(move |x| (x, z)))
        .map(|(x, z)| v.get(x, cy, z))
        .collect();
    let s = fft3(v)?;
    let shift = |i: usize, n: usize| (i + n / 2) % n;
    let fxy: Vec<f64> = (0..g.ny)
        .flat_map(|y| (0..g.nx).map(move |x| (x, y)))
        .map(|(x, y)| s.get(shift(x, g.nx), shift(y, g.ny), 0).norm().ln_1p())
        .collect();
    let fxz: Vec<f64> = (0..g.nz)
        .flat_map(|z| (0..g.nx).map(move |x| (x, z)))
        .map(|(x, z)| s.get(shift(x, g.nx), 0, shift(z, g.nz)).norm().ln_1p())
        .collect();
    let sec = |name: &str, w: usize, h: usize, pixels: Vec<f64>| Section {
        name: format!("{prefix}_{name}"),
        width: w,
        height: h,
        pixels,
    };
    Ok(vec![
        sec("xy", g.nx, g.ny, xy),
        sec("xz", g.nx, g.nz, xz),
        sec("spectrum_xy", g.nx, g.ny, fxy),
        sec("spectrum_xz", g.nx, g.nz, fxz),
    ])
}
