use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::forward::PhantomSpec;
use crate::grid::RealVolume;

/// Angular sampling of arc profiles, samples per degree.
pub const SAMPLES_PER_DEG: f64 = 8.0;

/// Peak-to-valley drop required between neighbouring spokes.
pub const DEFAULT_CRITERION: f64 = 0.1;

/// Section plane of an arc. In `XZ` the angle runs from +x towards +z
/// (neighbouring spokes near 0° are separated axially); in `XY` from +x
/// towards +y (separated laterally).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    XZ,
    XY,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcProfile {
    pub plane: Plane,
    /// Arc centre in voxel coordinates.
    pub center: (f64, f64, f64),
    pub radius_nm: f64,
    /// `(angle in degrees, intensity)`, max-normalized.
    pub samples: Vec<(f64, f64)>,
}

/// Voxel coordinates of the volume centre `(nx/2, ny/2, nz/2)`.
pub fn volume_center(v: &RealVolume) -> (f64, f64, f64) {
    let g = v.grid();
    ((g.nx / 2) as f64, (g.ny / 2) as f64, (g.nz / 2) as f64)
}

/// Trilinear samples of `v` along a circular arc, normalized to max 1.
pub fn arc_profile(
    v: &RealVolume,
    plane: Plane,
    center: (f64, f64, f64),
    radius_nm: f64,
    angle_range: (f64, f64),
) -> Result<ArcProfile> {
    if !(radius_nm > 0.0) {
        return Err(TsimError::config("radius", "arc radius must be > 0"));
    }
    let (a0, a1) = angle_range;
    if !(a1 > a0) {
        return Err(TsimError::config("angle_range", "end angle must exceed start angle"));
    }
    let g = v.grid();
    let n = ((a1 - a0) * SAMPLES_PER_DEG).round() as usize + 1;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let deg = a0 + (a1 - a0) * i as f64 / (n - 1) as f64;
        let (s, c) = deg.to_radians().sin_cos();
        let px = center.0 + radius_nm * c / g.dx_vox;
        let (py, pz) = match plane {
            Plane::XZ => (center.1, center.2 + radius_nm * s / g.dz_vox),
            Plane::XY => (center.1 + radius_nm * s / g.dx_vox, center.2),
        };
        let value = v.sample_trilinear(px, py, pz).ok_or_else(|| {
            TsimError::config("radius", format!("arc of radius {radius_nm:.1} nm leaves the volume"))
        })?;
        samples.push((deg, value));
    }
    let peak = samples.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.1));
    if !(peak > 0.0) {
        return Err(TsimError::Numerical("arc profile has no positive intensity".into()));
    }
    for s in &mut samples {
        s.1 /= peak;
    }
    Ok(ArcProfile {
        plane,
        center,
        radius_nm,
        samples,
    })
}

impl ArcProfile {
    /// Smallest peak-to-valley drop over neighbouring spokes whose centres lie
    /// at `centers_deg` (ascending). Peaks are the maxima within the spoke
    /// half-width of each centre; the valley is the minimum between two
    /// adjacent peak positions.
    pub fn min_drop(&self, centers_deg: &[f64], half_width_deg: f64) -> f64 {
        let peak_of = |c: f64| -> Option<(usize, f64)> {
            self.samples
                .iter()
                .enumerate()
                .filter(|(_, s)| (s.0 - c).abs() <= half_width_deg + 1e-9)
                .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                    Some((_, v)) if v >= s.1 => best,
                    _ => Some((i, s.1)),
                })
        };
        let peaks: Vec<(usize, f64)> = centers_deg.iter().filter_map(|&c| peak_of(c)).collect();
        if peaks.len() != centers_deg.len() || peaks.len() < 2 {
            return 0.0;
        }
        peaks
            .windows(2)
            .map(|p| {
                let (i0, v0) = p[0];
                let (i1, v1) = p[1];
                let valley = self.samples[i0..=i1].iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
                v0.min(v1) - valley
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Result of the outward radius search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AchievedResolution {
    /// Centre-to-centre spoke distance at the accepted radius, nm (rounded).
    pub d_nm: f64,
    pub radius_nm: f64,
}

/// Outward search for the smallest resolved spoke spacing.
#[derive(Clone, Debug)]
pub struct ResolutionSearch<'a> {
    pub phantom: &'a PhantomSpec,
    pub plane: Plane,
    /// Spoke spacing at which the search starts, nm.
    pub start_d_nm: f64,
    pub criterion_drop: f64,
    /// Angular half-span of the arc around the +x spoke, degrees.
    pub half_span_deg: f64,
}

impl<'a> ResolutionSearch<'a> {
    /// Arc over the five spokes centred on +x (four neighbouring pairs).
    pub fn new(phantom: &'a PhantomSpec, plane: Plane, start_d_nm: f64) -> Self {
        ResolutionSearch {
            phantom,
            plane,
            start_d_nm,
            criterion_drop: DEFAULT_CRITERION,
            half_span_deg: 2.5 * phantom.period_deg(),
        }
    }

    pub fn with_criterion(mut self, drop: f64) -> Self {
        self.criterion_drop = drop;
        self
    }

    fn spoke_centers(&self) -> Vec<f64> {
        let p = self.phantom.period_deg();
        let k = (self.half_span_deg / p).floor() as i64;
        let mut c: Vec<f64> = (-k..=k).map(|i| i as f64 * p).collect();
        // Centres at the very edge of the arc have no room for a peak window.
        c.retain(|&a| a.abs() + self.phantom.spoke_width_deg <= self.half_span_deg + 1e-9);
        c
    }

    /// Peak-to-valley drop at one radius.
    pub fn drop_at(&self, v: &RealVolume, radius_nm: f64) -> Result<f64> {
        let prof = arc_profile(
            v,
            self.plane,
            volume_center(v),
            radius_nm,
            (-self.half_span_deg, self.half_span_deg),
        )?;
        Ok(prof.min_drop(&self.spoke_centers(), self.phantom.spoke_width_deg))
    }

    /// Steps the radius outward by one voxel from the start spacing and
    /// returns the first radius at which every pair drops by the criterion.
    pub fn run(&self, v: &RealVolume) -> Result<AchievedResolution> {
        self.phantom.validate()?;
        if !(self.criterion_drop > 0.0 && self.criterion_drop <= 1.0) {
            return Err(TsimError::config("criterion_drop", "must lie in (0, 1]"));
        }
        let step = v.grid().dx_vox;
        let r0 = self
            .phantom
            .radius_for_spacing(self.start_d_nm)
            .max(self.phantom.inner_radius + step);
        let r_max = self.phantom.spoke_length * 1e3;
        let radii: Vec<f64> = (0..)
            .map(|i| r0 + i as f64 * step)
            .take_while(|&r| r <= r_max)
            .collect();
        let drops: Vec<Result<f64>> = radii.par_iter().map(|&r| self.drop_at(v, r)).collect();
        for (r, d) in radii.iter().zip(drops) {
            if d? >= self.criterion_drop {
                return Ok(AchievedResolution {
                    d_nm: self.phantom.spacing_at(*r).round(),
                    radius_nm: *r,
                });
            }
        }
        let largest = radii.last().map_or(self.start_d_nm, |&r| self.phantom.spacing_at(r));
        Err(TsimError::CriterionNotMet {
            largest_tested_nm: largest.round(),
        })
    }
}
