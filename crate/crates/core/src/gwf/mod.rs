//! Generalized Wiener filter restoration.
//!
//! Four steps per orientation: the three phase images are unmixed into
//! bands `D_0, D_+, D_−`; each band and its transfer function are shifted
//! laterally onto the output grid; all bands are then recombined with one
//! joint Wiener denominator
//!
//! ```text
//! F̂(q) = Σ H̃*(q)·D̃(q) / (Σ |H̃(q)|² + α)
//! ```
//!
//! Band convention: `G_p = D_0 + e^{iφ_p}·D_+ + e^{−iφ_p}·D_−` with
//! `D_± = F(k ∓ u)·H_±`, where `H_±` already carries the ½ weight of the
//! cosine. `D̃_+(q) = D_+(q + u)` pairs with `H̃_+(q) = H_+(q + u)`.

mod shift;

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::forward::AcquisitionSet;
use crate::grid::{
    downsample2, fft3, fft3_complex_inplace, freq_axes, ifft3, l2_normalize_clamp, ComplexSpectrum, GridSpec,
    RealVolume,
};
use crate::illumination::{visibility_profile, MixingMatrix, PatternConfig};
use crate::optics::{check_nyquist, effective_axial_cutoff, generate_psf, lateral_cutoff, OpticalConfig};

pub use shift::{embed_spectrum, shift_band, Origin};

/// Band transfer functions on the data grid, scaled so `H_0(0) = 1`.
#[derive(Clone, Debug)]
pub struct BandOTFs {
    pub h0: ComplexSpectrum,
    pub h_plus: ComplexSpectrum,
    pub h_minus: ComplexSpectrum,
    /// Lateral and axial extent of the restorable region, cycles/µm.
    pub support: (f64, f64),
}

/// Separated bands of one orientation, on the data grid.
#[derive(Clone, Debug)]
pub struct BandSet {
    pub orientation_deg: f64,
    /// Pattern frequency vector of this orientation, cycles/µm.
    pub wave_vector: (f64, f64),
    pub d0: ComplexSpectrum,
    pub d_plus: ComplexSpectrum,
    pub d_minus: ComplexSpectrum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Apodization {
    #[default]
    Off,
    /// Separable lateral × axial triangle over the restorable region.
    Triangle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwfParams {
    pub alpha: f64,
    #[serde(default)]
    pub apodization: Apodization,
    /// Defaults to the data grid upsampled by 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_grid: Option<GridSpec>,
}

impl GwfParams {
    pub fn new(alpha: f64) -> Self {
        GwfParams {
            alpha,
            apodization: Apodization::Off,
            output_grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(TsimError::config("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if let Some(g) = &self.output_grid {
            g.validate()?;
        }
        Ok(())
    }

    pub fn output_for(&self, data: &GridSpec) -> GridSpec {
        self.output_grid.unwrap_or_else(|| data.upsampled())
    }
}

/// Band OTFs for `pattern` on the data grid `grid`.
///
/// The kernels `h·{1, C, C*}` are formed on the grid upsampled by 2 and
/// block-averaged exactly like the simulated images, so the transfer
/// functions include the same averaging filter as the data.
pub fn band_otfs(optics: &OpticalConfig, pattern: &PatternConfig, grid: &GridSpec) -> Result<BandOTFs> {
    pattern.check_against(optics)?;
    let w_eff = effective_axial_cutoff(optics)?;
    check_nyquist(optics, grid, w_eff)?;
    let fine = grid.upsampled();
    let h = generate_psf(optics, &fine)?;
    let c = visibility_profile(pattern, optics, &fine);
    let weighted = |profile: &[f64]| -> Result<RealVolume> {
        let v = RealVolume::from_fn(fine, |x, y, z| h.data()[fine.index(x, y, z)] * profile[z])?;
        downsample2(&v)
    };

    let h0 = fft3(&downsample2(&h)?)?;
    let dc = h0.data()[0].re;
    if !(dc > 0.0) {
        return Err(TsimError::Numerical("PSF has non-positive total".into()));
    }
    let scale = 1.0 / dc;

    // C(z) = |V|·e^{iΦ}; the imaginary part vanishes for a real visibility.
    let re: Vec<f64> = c.v.iter().zip(&c.phi).map(|(v, p)| v.abs() * p.cos()).collect();
    let im: Vec<f64> = c.v.iter().zip(&c.phi).map(|(v, p)| v.abs() * p.sin()).collect();
    let mut hp = weighted(&re)?.to_complex();
    if im.iter().any(|v| v.abs() > 1e-12) {
        let imag = weighted(&im)?;
        for (a, b) in hp.iter_mut().zip(imag.data()) {
            a.im = *b;
        }
    }
    fft3_complex_inplace(&mut hp, grid);
    hp.par_iter_mut().for_each(|v| *v *= 0.5 * scale);
    let h_plus = ComplexSpectrum::new(*grid, hp)?;
    let h_minus = mirror_conj(&h_plus);

    let mut h0 = h0.scaled(scale);
    h0.data_mut()[0] = Complex64::new(1.0, 0.0);
    Ok(BandOTFs {
        h0,
        h_plus,
        h_minus,
        support: (lateral_cutoff(optics) + pattern.u_m, w_eff),
    })
}

/// `S'(k) = conj(S(−k))`.
pub fn mirror_conj(s: &ComplexSpectrum) -> ComplexSpectrum {
    let g = *s.grid();
    let data = (0..g.len())
        .into_par_iter()
        .map(|i| s.data()[g.mirror_index(i)].conj())
        .collect();
    ComplexSpectrum::from_raw(g, data)
}

/// Unmixes three phase images of one orientation into `(D_0, D_+, D_−)`.
pub fn separate_bands(images: &[&RealVolume], phases: &[f64], orientation_deg: f64, u_m: f64) -> Result<BandSet> {
    if images.len() != 3 {
        return Err(TsimError::config(
            "images",
            format!("exactly 3 phase images required, got {}", images.len()),
        ));
    }
    let mix = MixingMatrix::new(phases)?;
    let grid = *images[0].grid();
    for img in images {
        grid.ensure_same(img.grid(), "phase image")?;
    }
    let spectra: Vec<ComplexSpectrum> = images.iter().map(|v| fft3(v)).collect::<Result<_>>()?;
    let inv = mix.inverse;
    // Rows 2 and 3 of the inverse give 2·D_±; halve them.
    let weights = [
        [inv[0][0], inv[0][1], inv[0][2]],
        [0.5 * inv[1][0], 0.5 * inv[1][1], 0.5 * inv[1][2]],
        [0.5 * inv[2][0], 0.5 * inv[2][1], 0.5 * inv[2][2]],
    ];
    let band = |w: [Complex64; 3]| -> ComplexSpectrum {
        let data = (0..grid.len())
            .into_par_iter()
            .map(|i| w[0] * spectra[0].data()[i] + w[1] * spectra[1].data()[i] + w[2] * spectra[2].data()[i])
            .collect();
        ComplexSpectrum::from_raw(grid, data)
    };
    let t = orientation_deg.to_radians();
    Ok(BandSet {
        orientation_deg,
        wave_vector: (u_m * t.cos(), u_m * t.sin()),
        d0: band(weights[0]),
        d_plus: band(weights[1]),
        d_minus: band(weights[2]),
    })
}

/// Inverse of the mixing: `G_p = D_0 + e^{iφ_p}·D_+ + e^{−iφ_p}·D_−`.
pub fn mix_bands(bands: &BandSet, phases: &[f64]) -> Result<Vec<ComplexSpectrum>> {
    let g = *bands.d0.grid();
    phases
        .iter()
        .map(|&p| {
            let (ep, em) = (Complex64::from_polar(1.0, p), Complex64::from_polar(1.0, -p));
            let data = (0..g.len())
                .map(|i| bands.d0.data()[i] + ep * bands.d_plus.data()[i] + em * bands.d_minus.data()[i])
                .collect();
            ComplexSpectrum::new(g, data)
        })
        .collect()
}

fn triangle(grid: &GridSpec, support: (f64, f64)) -> Vec<f64> {
    let ax = freq_axes(grid);
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (x, y, z) = grid.coords(i);
            let lat = (1.0 - ax.x[x].hypot(ax.y[y]) / support.0).max(0.0);
            let axi = (1.0 - ax.z[z].abs() / support.1).max(0.0);
            lat * axi
        })
        .collect()
}

/// Joint Wiener recombination of every orientation's bands onto the output grid.
///
/// Returns the real-space estimate in object units, before clamping. Where
/// `Σ|H̃|² + α` is zero (only possible with `α = 0`) the estimate is set to 0.
pub fn wiener_recombine(bands: &[BandSet], otfs: &BandOTFs, params: &GwfParams) -> Result<RealVolume> {
    params.validate()?;
    if bands.is_empty() {
        return Err(TsimError::config("bands", "no orientations to recombine"));
    }
    let data = *otfs.h0.grid();
    for b in bands {
        data.ensure_same(b.d0.grid(), "band")?;
    }
    let out = params.output_for(&data);
    let n = out.len();
    let mut num = vec![Complex64::new(0.0, 0.0); n];
    let mut den = vec![0.0f64; n];

    let h0 = embed_spectrum(&otfs.h0, &out)?;
    for b in bands {
        let d0 = embed_spectrum(&b.d0, &out)?;
        num.par_iter_mut()
            .zip(den.par_iter_mut())
            .zip(h0.data().par_iter().zip(d0.data()))
            .for_each(|((nu, de), (h, d))| {
                *nu += h.conj() * d;
                *de += h.norm_sqr();
            });
        drop(d0);

        // The minus band is the mirror conjugate of the plus band:
        // D̃_−(q) = conj(D̃_+(−q)) and H̃_−(q) = conj(H̃_+(−q)).
        let back = (-b.wave_vector.0, -b.wave_vector.1);
        let dp = shift_band(&b.d_plus, back, &out, Origin::Centered)?;
        let hp = shift_band(&otfs.h_plus, back, &out, Origin::Signed)?;
        let (dp, hp) = (dp.data(), hp.data());
        num.par_iter_mut()
            .zip(den.par_iter_mut())
            .enumerate()
            .for_each(|(q, (nu, de))| {
                let m = out.mirror_index(q);
                let t = hp[q].conj() * dp[q];
                let t_m = hp[m].conj() * dp[m];
                *nu += t + t_m.conj();
                *de += hp[q].norm_sqr() + hp[m].norm_sqr();
            });
    }

    let apod = match params.apodization {
        Apodization::Off => None,
        Apodization::Triangle => Some(triangle(&out, otfs.support)),
    };
    // Spectral values live on the data grid scale; rescale for the output size.
    let ratio = n as f64 / data.len() as f64;
    let alpha = params.alpha;
    let spec: Vec<Complex64> = num
        .into_par_iter()
        .zip(den.par_iter())
        .enumerate()
        .map(|(i, (nu, &de))| {
            let d = de + alpha;
            if d <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let a = apod.as_ref().map_or(1.0, |a| a[i]);
            nu * (ratio * a / d)
        })
        .collect();
    ifft3(&ComplexSpectrum::new(out, spec)?)
}

/// Per-band energy `Σ|D|²` of one orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEnergy {
    pub orientation_deg: f64,
    pub d0: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

/// Record written next to a restored volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestoreLog {
    pub alpha: f64,
    pub apodization: Apodization,
    pub data_grid: GridSpec,
    pub output_grid: GridSpec,
    pub band_energy: Vec<BandEnergy>,
    pub elapsed_s: f64,
}

/// Separates, shifts and recombines an acquisition; no clamping.
pub fn restore_raw(acq: &AcquisitionSet, params: &GwfParams) -> Result<(RealVolume, RestoreLog)> {
    let start = Instant::now();
    acq.validate()?;
    params.validate()?;
    let pattern = &acq.pattern;
    let otfs = band_otfs(&acq.optics, pattern, acq.grid())?;
    let mut bands = Vec::with_capacity(pattern.orientations.len());
    let mut energy = Vec::with_capacity(pattern.orientations.len());
    for (o, &theta) in pattern.orientations.iter().enumerate() {
        let imgs: Vec<&RealVolume> = (0..pattern.phases.len()).map(|p| acq.image(o, p)).collect();
        let b = separate_bands(&imgs, &pattern.phases, theta, pattern.u_m)?;
        let e = |s: &ComplexSpectrum| s.data().iter().map(|c| c.norm_sqr()).sum::<f64>();
        energy.push(BandEnergy {
            orientation_deg: theta,
            d0: e(&b.d0),
            d_plus: e(&b.d_plus),
            d_minus: e(&b.d_minus),
        });
        bands.push(b);
    }
    let out = wiener_recombine(&bands, &otfs, params)?;
    let log = RestoreLog {
        alpha: params.alpha,
        apodization: params.apodization,
        data_grid: *acq.grid(),
        output_grid: *out.grid(),
        band_energy: energy,
        elapsed_s: start.elapsed().as_secs_f64(),
    };
    Ok((out, log))
}

/// Full restoration: `restore_raw`, then clamp negatives and ℓ2-normalize.
pub fn restore(acq: &AcquisitionSet, params: &GwfParams) -> Result<RealVolume> {
    Ok(restore_with_log(acq, params)?.0)
}

pub fn restore_with_log(acq: &AcquisitionSet, params: &GwfParams) -> Result<(RealVolume, RestoreLog)> {
    let (raw, log) = restore_raw(acq, params)?;
    Ok((l2_normalize_clamp(&raw)?, log))
}
