//! Physical configuration, analytic cutoff and resolution formulas, and the
//! widefield PSF / OTF.

mod psf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::grid::{fft3, ComplexSpectrum, GridSpec, RealVolume};

pub use psf::{defocus_amplitude, generate_psf, PSF_QUAD_TOL};

/// Optical parameters of the microscope and the structured-illumination source.
///
/// Units: `lambda_em` nm, `f_c` mm, `u_m` cycles/µm, `L` mm. The collimation
/// focal length is stored in millimetres; with that unit the effective axial
/// cutoff reproduces the tabulated TSIM values (a value of 100 nm would not).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    /// Emission wavelength, nm.
    pub lambda_em: f64,
    /// Numerical aperture of the objective.
    #[serde(rename = "NA")]
    pub na: f64,
    /// Refractive index of the immersion medium.
    pub n_imm: f64,
    /// Illumination magnification.
    #[serde(rename = "M_ill")]
    pub m_ill: f64,
    /// Collimation lens focal length, mm.
    pub f_c: f64,
    /// Lateral modulation frequency, cycles/µm.
    pub u_m: f64,
    /// Source size, mm.
    #[serde(rename = "L")]
    pub source_l: f64,
}

impl OpticalConfig {
    /// λ = 530 nm, NA = 1.4, n = 1.515, M_ill = 0.0222, f_c = 100 mm, with
    /// `u_m = um_ratio · u_c` and source size `l_mm`.
    pub fn standard(um_ratio: f64, l_mm: f64) -> Self {
        let mut cfg = OpticalConfig {
            lambda_em: 530.0,
            na: 1.4,
            n_imm: 1.515,
            m_ill: 0.0222,
            f_c: 100.0,
            u_m: 0.0,
            source_l: l_mm,
        };
        cfg.u_m = um_ratio * lateral_cutoff(&cfg);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(TsimError::config(name, format!("must be > 0, got {v}")))
            }
        };
        positive("lambda_em", self.lambda_em)?;
        positive("NA", self.na)?;
        positive("n_imm", self.n_imm)?;
        positive("M_ill", self.m_ill)?;
        positive("f_c", self.f_c)?;
        positive("u_m", self.u_m)?;
        if !(self.source_l.is_finite() && self.source_l >= 0.0) {
            return Err(TsimError::config("L", format!("must be >= 0, got {}", self.source_l)));
        }
        if self.na >= self.n_imm {
            return Err(TsimError::config(
                "NA",
                format!("NA {} must be below n_imm {}", self.na, self.n_imm),
            ));
        }
        let uc = lateral_cutoff(self);
        if self.u_m >= uc {
            return Err(TsimError::config(
                "u_m",
                format!("u_m {:.4} must be below the lateral cutoff {uc:.4} cycles/µm", self.u_m),
            ));
        }
        Ok(())
    }

    pub(crate) fn lambda_um(&self) -> f64 {
        self.lambda_em * 1e-3
    }

    pub fn um_ratio(&self) -> f64 {
        self.u_m / lateral_cutoff(self)
    }

    /// Axial frequency half-width of the visibility spectrum, `u_m·L/(2 n M_ill f_c)`.
    pub fn axial_extension(&self) -> f64 {
        self.u_m * self.source_l / (2.0 * self.n_imm * self.m_ill * self.f_c)
    }
}

/// Analytic cutoffs and resolution limits for one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPrediction {
    /// Lateral widefield cutoff, cycles/µm.
    pub u_c: f64,
    /// Axial widefield cutoff, cycles/µm.
    pub w_c: f64,
    /// Effective axial cutoff with the TSIM pattern, cycles/µm.
    pub w_eff: f64,
    /// Widefield lateral resolution, nm.
    pub dx: f64,
    /// Widefield axial resolution, nm.
    pub dz: f64,
    pub dx_sim: f64,
    pub dz_sim: f64,
}

/// `2·NA/λ`, cycles/µm.
pub fn lateral_cutoff(cfg: &OpticalConfig) -> f64 {
    2.0 * cfg.na / cfg.lambda_um()
}

/// `(n - sqrt(n² - NA²))/λ`, cycles/µm.
pub fn axial_cutoff(cfg: &OpticalConfig) -> Result<f64> {
    if cfg.na >= cfg.n_imm {
        return Err(TsimError::config(
            "NA",
            format!("NA {} >= n_imm {} (evanescent regime)", cfg.na, cfg.n_imm),
        ));
    }
    let n = cfg.n_imm;
    Ok((n - (n * n - cfg.na * cfg.na).sqrt()) / cfg.lambda_um())
}

/// `w_c + L·u_m/(2 n M_ill f_c)`, cycles/µm.
pub fn effective_axial_cutoff(cfg: &OpticalConfig) -> Result<f64> {
    Ok(axial_cutoff(cfg)? + cfg.axial_extension())
}

pub fn predict_resolution(cfg: &OpticalConfig) -> Result<ResolutionPrediction> {
    let u_c = lateral_cutoff(cfg);
    let w_c = axial_cutoff(cfg)?;
    let w_eff = w_c + cfg.axial_extension();
    let dx = 0.61 * cfg.lambda_em / cfg.na;
    let dz = 1e3 / w_c;
    Ok(ResolutionPrediction {
        u_c,
        w_c,
        w_eff,
        dx,
        dz,
        dx_sim: dx / (1.0 + cfg.u_m / u_c),
        dz_sim: dz * w_c / w_eff,
    })
}

pub(crate) fn check_nyquist(cfg: &OpticalConfig, grid: &GridSpec, axial_limit: f64) -> Result<()> {
    let uc = lateral_cutoff(cfg);
    if grid.nyquist_lateral() < uc {
        return Err(TsimError::Undersampled(format!(
            "lateral Nyquist {:.3} cycles/µm is below the lateral cutoff u_c = {uc:.3}",
            grid.nyquist_lateral()
        )));
    }
    if grid.nyquist_axial() < axial_limit {
        return Err(TsimError::Undersampled(format!(
            "axial Nyquist {:.3} cycles/µm is below the required axial cutoff {axial_limit:.3}",
            grid.nyquist_axial()
        )));
    }
    Ok(())
}

/// Widefield OTF: transform of the PSF, scaled so the DC value is exactly 1.
pub fn generate_otf(cfg: &OpticalConfig, grid: &GridSpec) -> Result<ComplexSpectrum> {
    let psf = generate_psf(cfg, grid)?;
    otf_from_psf(&psf)
}

pub fn otf_from_psf(psf: &RealVolume) -> Result<ComplexSpectrum> {
    let s = fft3(psf)?;
    let dc = s.data()[0].re;
    if dc <= 0.0 {
        return Err(TsimError::Numerical("PSF has non-positive total".into()));
    }
    let mut out = s.scaled(1.0 / dc);
    out.data_mut()[0] = num_complex::Complex64::new(1.0, 0.0);
    Ok(out)
}
