//! TSIM structured-illumination pattern.
//!
//! `i(x, z) = 1 + |V(z)|·cos(2π u_m·x + φ + Φ(z))` with the rect-source
//! visibility `V(z) = sinc(z·u_m·L/(n·M_ill·f_c))`. The pattern separates into
//! three lateral × axial products, `Σ_k j_k(x)·i_k(z)`:
//!
//! | k | j_k(x)               | i_k(z)          |
//! |---|----------------------|-----------------|
//! | 1 | 1                    | 1               |
//! | 2 | cos(2π u_m·x + φ)    | \|V\|·cos Φ     |
//! | 3 | sin(2π u_m·x + φ)    | −\|V\|·sin Φ    |
//!
//! For the rect source V is real, so Φ(z) is 0 where V ≥ 0 and π where V < 0.
//! In band form the pattern is `1 + Re{C(z)·e^{i(2π u_m·x + φ)}}` with the
//! complex visibility `C = |V|·e^{iΦ}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::grid::{signed_index, GridSpec};
use crate::optics::{lateral_cutoff, OpticalConfig};

/// Orientation and phase set of the illumination pattern.
///
/// `orientations` are in degrees, `phases` in radians, `u_m` in cycles/µm and
/// `source_L` in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub u_m: f64,
    #[serde(default = "default_orientations")]
    pub orientations: Vec<f64>,
    #[serde(default = "default_phases")]
    pub phases: Vec<f64>,
    #[serde(rename = "source_L")]
    pub source_l: f64,
    /// Forces `V ≡ 0` (widefield illumination). Test-only switch; not
    /// reachable through physical parameters.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub force_zero_visibility: bool,
}

fn default_orientations() -> Vec<f64> {
    vec![0.0, 60.0, 120.0]
}

fn default_phases() -> Vec<f64> {
    vec![0.0, TAU / 3.0, 2.0 * TAU / 3.0]
}

impl PatternConfig {
    /// Three orientations (0°, 60°, 120°) and three phases stepped by 2π/3.
    pub fn from_optics(cfg: &OpticalConfig) -> Self {
        PatternConfig {
            u_m: cfg.u_m,
            orientations: default_orientations(),
            phases: default_phases(),
            source_l: cfg.source_l,
            force_zero_visibility: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_m.is_finite() && self.u_m > 0.0) {
            return Err(TsimError::config("u_m", "must be > 0"));
        }
        if !(self.source_l.is_finite() && self.source_l >= 0.0) {
            return Err(TsimError::config("source_L", "must be >= 0"));
        }
        if self.orientations.is_empty() {
            return Err(TsimError::config("orientations", "at least one orientation required"));
        }
        for (i, a) in self.orientations.iter().enumerate() {
            for b in &self.orientations[..i] {
                let d = (a - b).rem_euclid(180.0);
                if d < 1e-9 || 180.0 - d < 1e-9 {
                    return Err(TsimError::config(
                        "orientations",
                        format!("{b}° and {a}° coincide modulo 180°"),
                    ));
                }
            }
        }
        MixingMatrix::new(&self.phases).map_err(|e| TsimError::config("phases", e.to_string()))?;
        Ok(())
    }

    /// Validates this pattern against the optics it will be used with.
    pub fn check_against(&self, cfg: &OpticalConfig) -> Result<()> {
        self.validate()?;
        let uc = lateral_cutoff(cfg);
        if self.u_m >= uc {
            return Err(TsimError::config(
                "u_m",
                format!("u_m {:.4} must be below the lateral cutoff {uc:.4} cycles/µm", self.u_m),
            ));
        }
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        if !rel(self.u_m, cfg.u_m) {
            return Err(TsimError::config(
                "u_m",
                format!("pattern u_m {} differs from optics u_m {}", self.u_m, cfg.u_m),
            ));
        }
        if !(rel(self.source_l, cfg.source_l) || self.source_l == cfg.source_l) {
            return Err(TsimError::config(
                "source_L",
                format!("pattern source_L {} differs from optics L {}", self.source_l, cfg.source_l),
            ));
        }
        Ok(())
    }

    /// Lateral frequency vector (cycles/µm) for an orientation in degrees.
    pub fn wave_vector(&self, orientation_deg: f64) -> (f64, f64) {
        let t = orientation_deg.to_radians();
        (self.u_m * t.cos(), self.u_m * t.sin())
    }

    /// Visibility using this pattern's `u_m` and source size.
    pub fn visibility(&self, cfg: &OpticalConfig, z_nm: f64) -> f64 {
        if self.force_zero_visibility {
            return 0.0;
        }
        sinc(z_nm * 1e-3 * self.u_m * self.source_l / (cfg.n_imm * cfg.m_ill * cfg.f_c))
    }

    /// Complex visibility `C(z) = |V|·e^{iΦ}`; real for the rect source.
    pub fn complex_visibility(&self, cfg: &OpticalConfig, z_nm: f64) -> Complex64 {
        Complex64::new(self.visibility(cfg, z_nm), 0.0)
    }
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

/// `V(z)` for the configuration's own `u_m` and `L`; `z` in nm.
pub fn visibility(cfg: &OpticalConfig, z_nm: f64) -> f64 {
    sinc(z_nm * 1e-3 * cfg.u_m * cfg.source_l / (cfg.n_imm * cfg.m_ill * cfg.f_c))
}

/// `(|V|, Φ)` with the sign of a real visibility folded into the phase.
pub fn magnitude_phase(v: f64) -> (f64, f64) {
    if v >= 0.0 {
        (v, 0.0)
    } else {
        (-v, PI)
    }
}

/// Sampled visibility along the axial (kernel) coordinate of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityProfile {
    /// Signed axial offsets, nm, DFT order.
    pub z_nm: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Visibility sampled on the axial kernel axis of `grid`.
///
/// The sinc is replaced by its periodic band-limited counterpart on the
/// grid's axial period: the sampled spectrum is the rect `|f| ≤ a/2` (half
/// weight on a bin that falls exactly on the edge), normalized so that
/// `V(0) = 1`. Like the periodic PSF this avoids truncation leakage, so the
/// band OTFs carry the visibility's axial support exactly.
pub fn visibility_profile(pcfg: &PatternConfig, cfg: &OpticalConfig, grid: &GridSpec) -> VisibilityProfile {
    let nz = grid.nz;
    let z_nm: Vec<f64> = (0..nz).map(|k| signed_index(k, nz) as f64 * grid.dz_vox).collect();
    let v: Vec<f64> = if pcfg.force_zero_visibility {
        vec![0.0; nz]
    } else {
        let half = 0.5 * pcfg.u_m * pcfg.source_l / (cfg.n_imm * cfg.m_ill * cfg.f_c);
        let df = 1.0 / (nz as f64 * grid.dz_vox * 1e-3);
        let weights: Vec<(f64, f64)> = (0..nz)
            .map(|m| signed_index(m, nz) as f64 * df)
            .filter_map(|f| {
                let d = f.abs() - half;
                if d.abs() <= 1e-9 * df {
                    Some((f, 0.5))
                } else if d < 0.0 {
                    Some((f, 1.0))
                } else {
                    None
                }
            })
            .collect();
        let norm: f64 = weights.iter().map(|w| w.1).sum();
        z_nm.iter()
            .map(|&z| weights.iter().map(|&(f, w)| w * (TAU * f * z * 1e-3).cos()).sum::<f64>() / norm)
            .collect()
    };
    let phi = v.iter().map(|&x| magnitude_phase(x).1).collect();
    VisibilityProfile { z_nm, v, phi }
}

/// Evaluates the pattern at lateral position `(x, y)` and axial offset `z` (nm).
pub fn pattern_value(
    pcfg: &PatternConfig,
    cfg: &OpticalConfig,
    xy_nm: (f64, f64),
    z_nm: f64,
    orientation_deg: f64,
    phase: f64,
) -> f64 {
    let (kx, ky) = pcfg.wave_vector(orientation_deg);
    let arg = TAU * (kx * xy_nm.0 + ky * xy_nm.1) * 1e-3 + phase;
    let (mag, phi) = magnitude_phase(pcfg.visibility(cfg, z_nm));
    1.0 + mag * (arg + phi).cos()
}

/// Lateral fields `j_k` (nx·ny, x fastest, centred coordinates) and axial
/// profiles `i_k` (nz, signed kernel offsets) of one orientation/phase.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatedPattern {
    pub j: [Vec<f64>; 3],
    pub i: [Vec<f64>; 3],
}

pub fn separated_components(
    pcfg: &PatternConfig,
    cfg: &OpticalConfig,
    grid: &GridSpec,
    orientation_deg: f64,
    phase: f64,
) -> SeparatedPattern {
    let (kx, ky) = pcfg.wave_vector(orientation_deg);
    let plane = grid.nx * grid.ny;
    let mut j2 = Vec::with_capacity(plane);
    let mut j3 = Vec::with_capacity(plane);
    for y in 0..grid.ny {
        for x in 0..grid.nx {
            let (px, py, _) = grid.centered_position(x, y, 0);
            let arg = TAU * (kx * px + ky * py) * 1e-3 + phase;
            j2.push(arg.cos());
            j3.push(arg.sin());
        }
    }
    let prof = visibility_profile(pcfg, cfg, grid);
    let (i2, i3): (Vec<f64>, Vec<f64>) = prof
        .v
        .iter()
        .map(|&v| {
            let (mag, phi) = magnitude_phase(v);
            (mag * phi.cos(), -mag * phi.sin())
        })
        .unzip();
    SeparatedPattern {
        j: [vec![1.0; plane], j2, j3],
        i: [vec![1.0; grid.nz], i2, i3],
    }
}

pub type Mat3 = [[Complex64; 3]; 3];

/// Phase-mixing matrix with rows `[1, ½e^{iφ_p}, ½e^{−iφ_p}]` and its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix {
    pub matrix: Mat3,
    pub inverse: Mat3,
    /// 1-norm condition number.
    pub condition: f64,
}

/// Upper bound on the condition number accepted for band separation.
pub const MAX_CONDITION: f64 = 1e6;

fn norm1(m: &Mat3) -> f64 {
    (0..3)
        .map(|c| (0..3).map(|r| m[r][c].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert3(m: &Mat3) -> Option<Mat3> {
    let c = |r: usize, k: usize| m[r][k];
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| c(r0, c0) * c(r1, c1) - c(r0, c1) * c(r1, c0);
    let det = c(0, 0) * cof(1, 2, 1, 2) - c(0, 1) * cof(1, 2, 0, 2) + c(0, 2) * cof(1, 2, 0, 1);
    if det.norm() < 1e-14 * norm1(m).powi(3) {
        return None;
    }
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut inv = [[Complex64::new(0.0, 0.0); 3]; 3];
    for r in 0..3 {
        for k in 0..3 {
            inv[r][k] = adj[r][k] / det;
        }
    }
    Some(inv)
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for r in 0..3 {
        for k in 0..3 {
            out[r][k] = (0..3).map(|j| a[r][j] * b[j][k]).sum();
        }
    }
    out
}

impl MixingMatrix {
    pub fn new(phases: &[f64]) -> Result<Self> {
        if phases.len() != 3 {
            return Err(TsimError::config(
                "phases",
                format!("exactly 3 phases per orientation required, got {}", phases.len()),
            ));
        }
        let mut matrix = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (row, &p) in matrix.iter_mut().zip(phases) {
            *row = [
                Complex64::new(1.0, 0.0),
                0.5 * Complex64::from_polar(1.0, p),
                0.5 * Complex64::from_polar(1.0, -p),
            ];
        }
        let inverse = invert3(&matrix).ok_or(TsimError::SingularMixing {
            condition: f64::INFINITY,
        })?;
        let condition = norm1(&matrix) * norm1(&inverse);
        if !(condition < MAX_CONDITION) {
            return Err(TsimError::SingularMixing { condition });
        }
        Ok(MixingMatrix {
            matrix,
            inverse,
            condition,
        })
    }
}

pub fn mixing_matrix(phases: &[f64]) -> Result<MixingMatrix> {
    MixingMatrix::new(phases)
}
