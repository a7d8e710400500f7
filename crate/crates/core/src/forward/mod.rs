//! Star phantom, structured-illumination forward model and photon noise.

mod noise;
mod phantom;

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};
use crate::grid::{downsample2, fft3_complex_inplace, ifft3_complex_inplace, GridSpec, RealVolume};
use crate::illumination::{separated_components, PatternConfig};
use crate::optics::{generate_psf, OpticalConfig};
use crate::tvol;

pub use noise::{add_poisson, add_poisson_stream, measure_snr_db, photon_scale, poisson_scaled, Snr};
pub use phantom::{make_star, PhantomSpec};

/// Orientation and phase of one raw image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub orientation_deg: f64,
    pub orientation_index: usize,
    pub phase_index: usize,
    pub phase_rad: f64,
}

/// Raw structured-illumination images, orientation-major then phase.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSet {
    pub images: Vec<RealVolume>,
    pub meta: Vec<ImageMeta>,
    pub optics: OpticalConfig,
    pub pattern: PatternConfig,
    pub snr_db: Snr,
    pub seed: Option<u64>,
}

impl AcquisitionSet {
    pub fn grid(&self) -> &GridSpec {
        self.images[0].grid()
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.pattern.orientations.len() * self.pattern.phases.len();
        if self.images.len() != want || self.meta.len() != want {
            return Err(TsimError::config(
                "images",
                format!("expected {want} images, found {}", self.images.len()),
            ));
        }
        let g = *self.grid();
        for img in &self.images {
            g.ensure_same(img.grid(), "acquisition image")?;
        }
        Ok(())
    }

    /// Image for orientation index `o` and phase index `p`.
    pub fn image(&self, o: usize, p: usize) -> &RealVolume {
        &self.images[o * self.pattern.phases.len() + p]
    }

    /// Applies Poisson noise at `snr` to every image.
    ///
    /// One photon scale is shared by all images so relative intensities are
    /// kept; image `i` draws from RNG stream `i`.
    pub fn with_noise(&self, snr: Snr, seed: u64) -> Result<AcquisitionSet> {
        snr.validate()?;
        let mut out = self.clone();
        out.snr_db = snr;
        out.seed = Some(seed);
        let db = match snr {
            Snr::Infinite => return Ok(out),
            Snr::Db(db) => db,
        };
        let (sum, count) = self.images.iter().fold((0.0, 0usize), |(s, c), v| {
            (s + v.data().iter().map(|x| x.max(0.0).sqrt()).sum::<f64>(), c + v.data().len())
        });
        let scale = photon_scale(sum / count as f64, db)?;
        out.images = self
            .images
            .par_iter()
            .enumerate()
            .map(|(i, v)| poisson_scaled(v, scale, seed, i as u64))
            .collect::<Result<_>>()?;
        Ok(out)
    }

    /// Writes `manifest.json` and one TVOL (f64) per image into `dir`.
    pub fn save(&self, dir: &Path, provenance: Option<serde_json::Value>) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| TsimError::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.images.len());
        for (img, meta) in self.images.iter().zip(&self.meta) {
            let name = image_file_name(meta);
            tvol::write_real(&dir.join(&name), img, tvol::DType::F64)?;
            entries.push(ManifestImage { file: name, meta: *meta });
        }
        let manifest = Manifest {
            optics: self.optics,
            pattern: self.pattern.clone(),
            snr_db: self.snr_db,
            seed: self.seed,
            grid: *self.grid(),
            images: entries,
            provenance,
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| TsimError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<AcquisitionSet> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(TsimError::MissingFile(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| TsimError::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let mut images = Vec::with_capacity(manifest.images.len());
        let mut meta = Vec::with_capacity(manifest.images.len());
        for entry in &manifest.images {
            let v = tvol::read_real(&dir.join(&entry.file))?;
            manifest.grid.ensure_same(v.grid(), &entry.file)?;
            images.push(v);
            meta.push(entry.meta);
        }
        let acq = AcquisitionSet {
            images,
            meta,
            optics: manifest.optics,
            pattern: manifest.pattern,
            snr_db: manifest.snr_db,
            seed: manifest.seed,
        };
        acq.validate()?;
        Ok(acq)
    }
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct ManifestImage {
    file: String,
    #[serde(flatten)]
    meta: ImageMeta,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    optics: OpticalConfig,
    pattern: PatternConfig,
    snr_db: Snr,
    seed: Option<u64>,
    grid: GridSpec,
    images: Vec<ManifestImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// `img_o{orientation}_p{phase index}.tvol`, orientation in degrees.
pub fn image_file_name(meta: &ImageMeta) -> String {
    format!("img_o{}_p{}.tvol", meta.orientation_deg, meta.phase_index)
}

/// Negative values are FFT round-off and are clamped to zero; anything below
/// this fraction of the peak indicates a broken kernel.
const NEGATIVE_LIMIT: f64 = 1e-6;

/// Simulates every orientation/phase image on the fine grid of `f` and
/// block-averages it onto `grid_out`.
///
/// The three separable terms share orientation-independent kernels
/// `K_k = FFT(h·i_k)`. Per orientation the two modulated objects
/// `f·cos(2π u·x)` and `f·sin(2π u·x)` are transformed once; each phase is a
/// linear combination of them, so one inverse FFT per image suffices.
pub fn simulate(
    f: &RealVolume,
    optics: &OpticalConfig,
    pattern: &PatternConfig,
    grid_out: &GridSpec,
) -> Result<AcquisitionSet> {
    optics.validate()?;
    pattern.validate()?;
    pattern.check_against(optics)?;
    let fine = *f.grid();
    grid_out.ensure_same(&fine.downsampled()?, "data grid (fine grid downsampled by 2)")?;

    let h = generate_psf(optics, &fine)?;
    let plane = fine.nx * fine.ny;

    // Axial profiles are the same for every orientation and phase.
    let axial = separated_components(pattern, optics, &fine, 0.0, 0.0).i;
    let kernel = |profile: &[f64]| -> Vec<Complex64> {
        let mut k: Vec<Complex64> = h
            .data()
            .par_iter()
            .enumerate()
            .map(|(i, &v)| Complex64::new(v * profile[i / plane], 0.0))
            .collect();
        fft3_complex_inplace(&mut k, &fine);
        k
    };
    let nonzero = |p: &[f64]| p.iter().any(|v| v.abs() > 1e-12);
    let k1 = kernel(&axial[0]);
    let k2 = nonzero(&axial[1]).then(|| kernel(&axial[1]));
    let k3 = nonzero(&axial[2]).then(|| kernel(&axial[2]));

    let mut obj = f.to_complex();
    fft3_complex_inplace(&mut obj, &fine);
    // Widefield term, shared by every image.
    let base: Vec<Complex64> = obj.par_iter().zip(&k1).map(|(a, b)| a * b).collect();
    drop(k1);
    drop(obj);

    let mut images = Vec::new();
    let mut meta = Vec::new();
    for (oi, &theta) in pattern.orientations.iter().enumerate() {
        let modulated = if k2.is_some() || k3.is_some() {
            let lateral = separated_components(pattern, optics, &fine, theta, 0.0).j;
            let modulate = |field: &[f64]| -> Vec<Complex64> {
                let mut m: Vec<Complex64> = f
                    .data()
                    .par_iter()
                    .enumerate()
                    .map(|(i, &v)| Complex64::new(v * field[i % plane], 0.0))
                    .collect();
                fft3_complex_inplace(&mut m, &fine);
                m
            };
            Some((modulate(&lateral[1]), modulate(&lateral[2])))
        } else {
            None
        };

        for (pi, &phase) in pattern.phases.iter().enumerate() {
            let mut spec = base.clone();
            if let Some((pc, ps)) = &modulated {
                let (s, c) = phase.sin_cos();
                spec.par_iter_mut().enumerate().for_each(|(i, g)| {
                    let j2 = c * pc[i] - s * ps[i];
                    let j3 = s * pc[i] + c * ps[i];
                    if let Some(k2) = &k2 {
                        *g += j2 * k2[i];
                    }
                    if let Some(k3) = &k3 {
                        *g += j3 * k3[i];
                    }
                });
            }
            ifft3_complex_inplace(&mut spec, &fine);
            let mut real: Vec<f64> = spec.into_iter().map(|c| c.re).collect();
            let peak = real.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            for v in &mut real {
                if *v < -NEGATIVE_LIMIT * peak {
                    return Err(TsimError::Numerical(format!(
                        "simulated intensity {v:.3e} is negative beyond round-off (peak {peak:.3e})"
                    )));
                }
                *v = v.max(0.0);
            }
            images.push(downsample2(&RealVolume::new(fine, real)?)?);
            meta.push(ImageMeta {
                orientation_deg: theta,
                orientation_index: oi,
                phase_index: pi,
                phase_rad: phase,
            });
        }
    }

    Ok(AcquisitionSet {
        images,
        meta,
        optics: *optics,
        pattern: pattern.clone(),
        snr_db: Snr::Infinite,
        seed: None,
    })
}

/// Widefield image `f ⊗ h` on the fine grid.
pub fn widefield(f: &RealVolume, optics: &OpticalConfig) -> Result<RealVolume> {
    let fine = *f.grid();
    let h = generate_psf(optics, &fine)?;
    let mut a = f.to_complex();
    let mut b = h.to_complex();
    fft3_complex_inplace(&mut a, &fine);
    fft3_complex_inplace(&mut b, &fine);
    a.par_iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    ifft3_complex_inplace(&mut a, &fine);
    RealVolume::new(fine, a.into_iter().map(|c| c.re).collect())
}
