use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::grid::{GridSpec, RealVolume};

/// Star-like resolution phantom.
///
/// Spokes are radial wedges with centres every `360°/spokes_total`, one of
/// them on the +x axis. A voxel belongs to the star when its radius lies in
/// `[inner_radius, spoke_length]` and both its XZ-plane angle `atan2(z, x)`
/// and its XY-plane angle `atan2(y, x)` fall within `spoke_width_deg` of a
/// spoke centre. The XZ and XY mid-sections therefore each show the full star.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    #[serde(default = "default_spokes")]
    pub spokes_total: usize,
    /// Outer spoke radius, µm.
    #[serde(default = "default_length")]
    pub spoke_length: f64,
    /// Angular half-width of each spoke, degrees.
    #[serde(default = "default_width")]
    pub spoke_width_deg: f64,
    /// Radius of the empty core, nm.
    #[serde(default = "default_inner")]
    pub inner_radius: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
}

fn default_spokes() -> usize {
    24
}
fn default_length() -> f64 {
    3.0
}
fn default_width() -> f64 {
    3.75
}
fn default_inner() -> f64 {
    100.0
}
fn default_intensity() -> f64 {
    1.0
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            spokes_total: default_spokes(),
            spoke_length: default_length(),
            spoke_width_deg: default_width(),
            inner_radius: default_inner(),
            intensity: default_intensity(),
        }
    }
}

impl PhantomSpec {
    /// Desk-scale star: 24 spokes, 2 µm long.
    pub fn desk() -> Self {
        PhantomSpec {
            spoke_length: 2.0,
            ..Default::default()
        }
    }

    pub fn period_deg(&self) -> f64 {
        360.0 / self.spokes_total as f64
    }

    /// Centre-to-centre distance of neighbouring spokes at radius `r_nm`.
    pub fn spacing_at(&self, r_nm: f64) -> f64 {
        2.0 * r_nm * (std::f64::consts::PI / self.spokes_total as f64).sin()
    }

    /// Radius at which neighbouring spokes are `d_nm` apart.
    pub fn radius_for_spacing(&self, d_nm: f64) -> f64 {
        d_nm / (2.0 * (std::f64::consts::PI / self.spokes_total as f64).sin())
    }

    pub fn validate(&self) -> Result<()> {
        if self.spokes_total == 0 || self.spokes_total % 4 != 0 {
            return Err(TsimError::config(
                "spokes_total",
                format!("{} is not a positive multiple of 4", self.spokes_total),
            ));
        }
        let half_period = self.period_deg() / 2.0;
        if !(self.spoke_width_deg > 0.0 && self.spoke_width_deg < half_period) {
            return Err(TsimError::config(
                "spoke_width_deg",
                format!("must lie in (0, {half_period})"),
            ));
        }
        if !(self.spoke_length > 0.0 && self.inner_radius >= 0.0 && self.inner_radius < self.spoke_length * 1e3) {
            return Err(TsimError::config(
                "spoke_length",
                "need 0 <= inner_radius < spoke_length",
            ));
        }
        Ok(())
    }

    /// Whether an angle (degrees) lies within a spoke.
    #[inline]
    pub fn in_spoke(&self, angle_deg: f64) -> bool {
        let p = self.period_deg();
        let d = angle_deg - p * (angle_deg / p).round();
        d.abs() <= self.spoke_width_deg
    }

    /// Membership test at a position relative to the star centre, nm.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let r = (x * x + y * y + z * z).sqrt();
        if r < self.inner_radius || r > self.spoke_length * 1e3 {
            return false;
        }
        self.in_spoke(z.atan2(x).to_degrees()) && self.in_spoke(y.atan2(x).to_degrees())
    }
}

/// Voxelized star centred at voxel `(nx/2, ny/2, nz/2)`.
pub fn make_star(spec: &PhantomSpec, grid: &GridSpec) -> Result<RealVolume> {
    spec.validate()?;
    grid.validate()?;
    let half_lat = (grid.nx.min(grid.ny) / 2) as f64 * grid.dx_vox;
    let half_ax = (grid.nz / 2) as f64 * grid.dz_vox;
    let len_nm = spec.spoke_length * 1e3;
    if len_nm > half_lat.min(half_ax) {
        return Err(TsimError::config(
            "spoke_length",
            format!(
                "{} µm exceeds half the grid extent ({:.3} µm)",
                spec.spoke_length,
                half_lat.min(half_ax) * 1e-3
            ),
        ));
    }
    RealVolume::from_fn(*grid, |x, y, z| {
        let (px, py, pz) = grid.centered_position(x, y, z);
        if spec.contains(px, py, pz) {
            spec.intensity
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (PhantomSpec, GridSpec) {
        let spec = PhantomSpec {
            spoke_length: 1.2,
            ..PhantomSpec::default()
        };
        (spec, GridSpec::cubic(128, 20.0).unwrap())
    }

    #[test]
    fn core_is_empty_and_centre_line_is_filled() {
        let (spec, g) = small();
        let v = make_star(&spec, &g).unwrap();
        let c = g.nx / 2;
        assert_eq!(v.get(c, c, c), 0.0);
        // r = 1 µm along +x: 50 voxels.
        assert_eq!(v.get(c + 50, c, c), spec.intensity);
        assert_eq!(v.get(c, c, c + 50), spec.intensity);
        assert!(v.data().iter().all(|&x| x == 0.0 || x == spec.intensity));
    }

    #[test]
    fn spoke_too_long_rejected() {
        let spec = PhantomSpec {
            spoke_length: 1.5,
            ..PhantomSpec::default()
        };
        let g = GridSpec::cubic(128, 20.0).unwrap();
        let err = make_star(&spec, &g).unwrap_err();
        assert!(err.to_string().contains("spoke_length"));
    }

    #[test]
    fn invalid_specs() {
        let bad = PhantomSpec {
            spokes_total: 22,
            ..PhantomSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhantomSpec {
            spoke_width_deg: 8.0,
            ..PhantomSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    /// Distance (nm) from an XZ-plane point to the nearest spoke or radial boundary.
    fn boundary_distance(spec: &PhantomSpec, x: f64, z: f64) -> f64 {
        let r = x.hypot(z);
        let p = spec.period_deg();
        let a = z.atan2(x).to_degrees();
        let d = (a - p * (a / p).round()).abs();
        let angular = r * (d - spec.spoke_width_deg).abs().to_radians();
        angular
            .min((r - spec.inner_radius).abs())
            .min((r - spec.spoke_length * 1e3).abs())
    }

    #[test]
    fn xz_section_invariant_under_period_rotation() {
        // Rotate the XZ mid-section by one angular period about the y axis and
        // compare voxels that are not cut by a boundary (voxelization error).
        let (spec, g) = small();
        let v = make_star(&spec, &g).unwrap();
        let c = (g.nx / 2) as isize;
        let rot = spec.period_deg().to_radians();
        let (mut agree, mut total) = (0usize, 0usize);
        for z in 0..g.nz as isize {
            for x in 0..g.nx as isize {
                let (dx, dz) = ((x - c) as f64, (z - c) as f64);
                if boundary_distance(&spec, dx * g.dx_vox, dz * g.dz_vox) < g.dx_vox {
                    continue;
                }
                let rx = (dx * rot.cos() - dz * rot.sin()).round() as isize + c;
                let rz = (dx * rot.sin() + dz * rot.cos()).round() as isize + c;
                if rx < 0 || rz < 0 || rx >= g.nx as isize || rz >= g.nz as isize {
                    continue;
                }
                let a = v.get(x as usize, c as usize, z as usize);
                let b = v.get(rx as usize, c as usize, rz as usize);
                total += 1;
                agree += (a == b) as usize;
            }
        }
        let frac = agree as f64 / total as f64;
        assert!(frac >= 0.99, "agreement {frac}");
    }

    #[test]
    fn spacing_chord_inversion() {
        let spec = PhantomSpec::default();
        let r = spec.radius_for_spacing(298.0);
        assert!((r - 1141.5).abs() < 0.5, "r = {r}");
        assert!((spec.spacing_at(r) - 298.0).abs() < 1e-9);
    }
}
