//! Sampled volumes, 3D FFT services and frequency bookkeeping.
//!
//! All volumes are stored row-major with x fastest and z slowest. Spectra keep
//! DC at index `(0, 0, 0)` (no fftshift); use [`freq_axes`] to map indices to
//! physical frequencies in cycles/µm. Voxel pitches are in nanometres.

pub(crate) mod fft;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsimError};

pub use fft::Direction;

/// Grid dimensions and voxel pitch. `dx_vox` applies to both x and y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Lateral voxel pitch, nm.
    pub dx_vox: f64,
    /// Axial voxel pitch, nm.
    pub dz_vox: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, dx_vox: f64, dz_vox: f64) -> Result<Self> {
        let g = GridSpec {
            nx,
            ny,
            nz,
            dx_vox,
            dz_vox,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn cubic(n: usize, pitch_nm: f64) -> Result<Self> {
        Self::new(n, n, n, pitch_nm, pitch_nm)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nz", self.nz)] {
            if n < 8 || n % 2 != 0 {
                return Err(TsimError::InvalidGrid(format!(
                    "{name} = {n}; counts must be even and >= 8"
                )));
            }
        }
        for (name, p) in [("dx_vox", self.dx_vox), ("dz_vox", self.dz_vox)] {
            if !(p.is_finite() && p > 0.0) {
                return Err(TsimError::InvalidGrid(format!("{name} = {p}; must be > 0")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / (self.nx * self.ny);
        (x, y, z)
    }

    /// Same field of view at half the sample count and twice the pitch.
    pub fn downsampled(&self) -> Result<Self> {
        if self.nx % 2 != 0 || self.ny % 2 != 0 || self.nz % 2 != 0 {
            return Err(TsimError::InvalidGrid("odd dimension cannot be halved".into()));
        }
        GridSpec::new(
            self.nx / 2,
            self.ny / 2,
            self.nz / 2,
            self.dx_vox * 2.0,
            self.dz_vox * 2.0,
        )
    }

    /// Same field of view at twice the sample count and half the pitch.
    pub fn upsampled(&self) -> Self {
        GridSpec {
            nx: self.nx * 2,
            ny: self.ny * 2,
            nz: self.nz * 2,
            dx_vox: self.dx_vox / 2.0,
            dz_vox: self.dz_vox / 2.0,
        }
    }

    /// Lateral Nyquist frequency, cycles/µm.
    pub fn nyquist_lateral(&self) -> f64 {
        1.0 / (2.0 * self.dx_vox * 1e-3)
    }

    /// Axial Nyquist frequency, cycles/µm.
    pub fn nyquist_axial(&self) -> f64 {
        1.0 / (2.0 * self.dz_vox * 1e-3)
    }

    /// Frequency steps (dkx, dky, dkz) in cycles/µm.
    pub fn freq_steps(&self) -> (f64, f64, f64) {
        (
            1.0 / (self.nx as f64 * self.dx_vox * 1e-3),
            1.0 / (self.ny as f64 * self.dx_vox * 1e-3),
            1.0 / (self.nz as f64 * self.dz_vox * 1e-3),
        )
    }

    /// Voxel centre relative to the grid centre `(n/2, n/2, n/2)`, in nm.
    #[inline]
    pub fn centered_position(&self, x: usize, y: usize, z: usize) -> (f64, f64, f64) {
        (
            (x as f64 - (self.nx / 2) as f64) * self.dx_vox,
            (y as f64 - (self.ny / 2) as f64) * self.dx_vox,
            (z as f64 - (self.nz / 2) as f64) * self.dz_vox,
        )
    }

    /// Voxel offset from index 0 with wrap-around (DFT order), in nm.
    #[inline]
    pub fn signed_position(&self, x: usize, y: usize, z: usize) -> (f64, f64, f64) {
        (
            signed_index(x, self.nx) as f64 * self.dx_vox,
            signed_index(y, self.ny) as f64 * self.dx_vox,
            signed_index(z, self.nz) as f64 * self.dz_vox,
        )
    }

    /// Index of the frequency `-k` for flat index `idx`.
    #[inline]
    pub fn mirror_index(&self, idx: usize) -> usize {
        let (x, y, z) = self.coords(idx);
        self.index(
            (self.nx - x) % self.nx,
            (self.ny - y) % self.ny,
            (self.nz - z) % self.nz,
        )
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.nz == other.nz
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_shape(other)
            && approx_eq(self.dx_vox, other.dx_vox)
            && approx_eq(self.dz_vox, other.dz_vox)
        {
            Ok(())
        } else {
            Err(TsimError::GridMismatch(format!(
                "{what}: {}x{}x{} @ ({}, {}) nm vs {}x{}x{} @ ({}, {}) nm",
                self.nx,
                self.ny,
                self.nz,
                self.dx_vox,
                self.dz_vox,
                other.nx,
                other.ny,
                other.nz,
                other.dx_vox,
                other.dz_vox
            )))
        }
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// DFT-order signed index: `0..n/2` stay positive, `n/2..n` map to `-n/2..-1`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Per-axis frequency coordinates in cycles/µm, DFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqAxes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

fn axis(n: usize, pitch_nm: f64) -> Vec<f64> {
    let step = 1.0 / (n as f64 * pitch_nm * 1e-3);
    (0..n).map(|i| signed_index(i, n) as f64 * step).collect()
}

pub fn freq_axes(grid: &GridSpec) -> FreqAxes {
    FreqAxes {
        x: axis(grid.nx, grid.dx_vox),
        y: axis(grid.ny, grid.dx_vox),
        z: axis(grid.nz, grid.dz_vox),
    }
}

/// Real scalar field sampled on a [`GridSpec`]. Values are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVolume {
    grid: GridSpec,
    data: Vec<f64>,
}

impl RealVolume {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(TsimError::GridMismatch(format!(
                "data has {} elements, grid expects {}",
                data.len(),
                grid.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TsimError::NonFinite { index });
        }
        Ok(RealVolume { grid, data })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_raw(grid: GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        RealVolume { grid, data }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        RealVolume {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        RealVolume {
            data: vec![value; grid.len()],
            grid,
        }
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel index.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64 + Sync,
    {
        let plane = grid.nx * grid.ny;
        let mut data = vec![0.0; grid.len()];
        data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
            for y in 0..grid.ny {
                for x in 0..grid.nx {
                    slab[x + grid.nx * y] = f(x, y, z);
                }
            }
        });
        RealVolume::new(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> RealVolume {
        RealVolume::from_raw(self.grid, self.data.iter().map(|v| v * s).collect())
    }

    /// Trilinear sample at fractional voxel coordinates; `None` outside the grid.
    pub fn sample_trilinear(&self, x: f64, y: f64, z: f64) -> Option<f64> {
        let g = &self.grid;
        let inside = |v: f64, n: usize| v >= 0.0 && v <= (n - 1) as f64;
        if !(inside(x, g.nx) && inside(y, g.ny) && inside(z, g.nz)) {
            return None;
        }
        let (x0, y0, z0) = (x.floor() as usize, y.floor() as usize, z.floor() as usize);
        let (x1, y1, z1) = (
            (x0 + 1).min(g.nx - 1),
            (y0 + 1).min(g.ny - 1),
            (z0 + 1).min(g.nz - 1),
        );
        let (fx, fy, fz) = (x - x0 as f64, y - y0 as f64, z - z0 as f64);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.get(x0, y0, z0), self.get(x1, y0, z0), fx);
        let c10 = lerp(self.get(x0, y1, z0), self.get(x1, y1, z0), fx);
        let c01 = lerp(self.get(x0, y0, z1), self.get(x1, y0, z1), fx);
        let c11 = lerp(self.get(x0, y1, z1), self.get(x1, y1, z1), fx);
        Some(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz))
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

/// Complex spectrum on a [`GridSpec`], DC at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(TsimError::GridMismatch(format!(
                "spectrum has {} elements, grid expects {}",
                data.len(),
                grid.len()
            )));
        }
        if let Some(index) = data.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(TsimError::NonFinite { index });
        }
        Ok(ComplexSpectrum { grid, data })
    }

    pub(crate) fn from_raw(grid: GridSpec, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        ComplexSpectrum { grid, data }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ComplexSpectrum {
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Complex64 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn peak_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|S(k) - conj(S(-k))|` relative to the peak magnitude.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let peak = self.peak_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let g = self.grid;
        let worst = (0..self.data.len())
            .into_par_iter()
            .map(|i| (self.data[i] - self.data[g.mirror_index(i)].conj()).norm())
            .reduce(|| 0.0, f64::max);
        worst / peak
    }

    pub fn scaled(&self, s: f64) -> ComplexSpectrum {
        ComplexSpectrum::from_raw(self.grid, self.data.iter().map(|c| c * s).collect())
    }
}

/// Tolerance on Hermitian asymmetry accepted by [`ifft3`].
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Imaginary residue (relative to the real peak) silently discarded by [`ifft3`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Unnormalized forward DFT of a real volume.
pub fn fft3(v: &RealVolume) -> Result<ComplexSpectrum> {
    if let Some(index) = v.data.iter().position(|x| !x.is_finite()) {
        return Err(TsimError::NonFinite { index });
    }
    let mut data = v.to_complex();
    fft::fft3_inplace(&mut data, &v.grid, Direction::Forward);
    Ok(ComplexSpectrum::from_raw(v.grid, data))
}

/// Inverse DFT with `1/N` normalization of a Hermitian spectrum.
pub fn ifft3(s: &ComplexSpectrum) -> Result<RealVolume> {
    let asym = s.hermitian_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(TsimError::NonHermitian {
            max_asymmetry: asym,
        });
    }
    let mut data = s.data.clone();
    ifft3_complex_inplace(&mut data, &s.grid);
    let peak = data.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let resid = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if peak > 0.0 && resid > IMAG_RESIDUE_TOL * peak {
        return Err(TsimError::ImaginaryResidue {
            residue: resid / peak,
        });
    }
    RealVolume::new(s.grid, data.into_iter().map(|c| c.re).collect())
}

/// Forward complex transform in place (unnormalized).
pub fn fft3_complex_inplace(data: &mut [Complex64], grid: &GridSpec) {
    fft::fft3_inplace(data, grid, Direction::Forward);
}

/// Inverse complex transform in place, including the `1/N` factor.
pub fn ifft3_complex_inplace(data: &mut [Complex64], grid: &GridSpec) {
    fft::fft3_inplace(data, grid, Direction::Inverse);
    let inv = 1.0 / grid.len() as f64;
    data.par_iter_mut().for_each(|c| *c *= inv);
}

/// 2×2×2 block average; pitches double.
pub fn downsample2(v: &RealVolume) -> Result<RealVolume> {
    let g = v.grid;
    if g.nx % 2 != 0 || g.ny % 2 != 0 || g.nz % 2 != 0 {
        return Err(TsimError::InvalidGrid(format!(
            "downsample2 needs even dimensions, got {}x{}x{}",
            g.nx, g.ny, g.nz
        )));
    }
    let out = GridSpec {
        nx: g.nx / 2,
        ny: g.ny / 2,
        nz: g.nz / 2,
        dx_vox: g.dx_vox * 2.0,
        dz_vox: g.dz_vox * 2.0,
    };
    let mut data = vec![0.0; out.len()];
    data.par_chunks_mut(out.nx * out.ny)
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..out.ny {
                for x in 0..out.nx {
                    let mut acc = 0.0;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                acc += v.get(2 * x + dx, 2 * y + dy, 2 * z + dz);
                            }
                        }
                    }
                    slab[x + out.nx * y] = acc / 8.0;
                }
            }
        });
    // Output grids smaller than 8 are allowed here; only the source is validated.
    Ok(RealVolume::from_raw(out, data))
}

/// Clamps negatives to zero, then scales to unit ℓ2 norm.
pub fn l2_normalize_clamp(v: &RealVolume) -> Result<RealVolume> {
    let clamped: Vec<f64> = v.data.iter().map(|&x| x.max(0.0)).collect();
    let norm = clamped.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(TsimError::Numerical(
            "volume has no positive values to normalize".into(),
        ));
    }
    Ok(RealVolume::from_raw(
        v.grid,
        clamped.into_iter().map(|x| x / norm).collect(),
    ))
}

/// Trilinear resampling onto `target`, matching physical grid centres.
pub fn resample_trilinear(v: &RealVolume, target: GridSpec) -> Result<RealVolume> {
    target.validate()?;
    let g = *v.grid();
    RealVolume::from_fn(target, |x, y, z| {
        let (px, py, pz) = target.centered_position(x, y, z);
        let sx = px / g.dx_vox + (g.nx / 2) as f64;
        let sy = py / g.dx_vox + (g.ny / 2) as f64;
        let sz = pz / g.dz_vox + (g.nz / 2) as f64;
        v.sample_trilinear(sx, sy, sz).unwrap_or(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(grid: GridSpec, seed: u64) -> RealVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RealVolume::new(grid, data).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::cubic(8, 1.0).is_ok());
        assert!(GridSpec::cubic(6, 1.0).is_err());
        assert!(GridSpec::new(8, 9, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 8, 0.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 8, 1.0, -2.0).is_err());
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = GridSpec::cubic(16, 20.0).unwrap();
        let mut d = vec![0.0; g.len()];
        d[0] = 1.0;
        let s = fft3(&RealVolume::new(g, d).unwrap()).unwrap();
        for c in s.data() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_volume_concentrates_at_dc() {
        let g = GridSpec::new(8, 10, 12, 20.0, 30.0).unwrap();
        let s = fft3(&RealVolume::constant(g, 2.5)).unwrap();
        let n = g.len() as f64;
        assert!((s.data()[0] - Complex64::new(2.5 * n, 0.0)).norm() < 1e-9);
        for c in &s.data()[1..] {
            assert!(c.norm() < 1e-9);
        }
    }

    #[test]
    fn parseval_matches_direct_sums() {
        let g = GridSpec::cubic(8, 40.0).unwrap();
        let v = random_volume(g, 7);
        let s = fft3(&v).unwrap();
        let space: f64 = v.data().iter().map(|x| x * x).sum();
        let freq: f64 = s.data().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((space - freq).abs() <= 1e-9 * space);
    }

    #[test]
    fn fft_matches_naive_dft() {
        // Direct O(N^2) DFT on a small anisotropic grid as an independent oracle.
        let g = GridSpec::new(8, 10, 8, 40.0, 40.0).unwrap();
        let v = random_volume(g, 3);
        let s = fft3(&v).unwrap();
        let tau = std::f64::consts::TAU;
        for &(kx, ky, kz) in &[(0, 0, 0), (1, 2, 3), (7, 9, 4), (4, 5, 1)] {
            let mut acc = Complex64::new(0.0, 0.0);
            for z in 0..g.nz {
                for y in 0..g.ny {
                    for x in 0..g.nx {
                        let ph = -tau
                            * ((kx * x) as f64 / g.nx as f64
                                + (ky * y) as f64 / g.ny as f64
                                + (kz * z) as f64 / g.nz as f64);
                        acc += v.get(x, y, z) * Complex64::from_polar(1.0, ph);
                    }
                }
            }
            assert!((acc - s.get(kx, ky, kz)).norm() < 1e-9);
        }
    }

    #[test]
    fn round_trip_identity() {
        let g = GridSpec::new(16, 8, 12, 20.0, 50.0).unwrap();
        let v = random_volume(g, 11);
        let back = ifft3(&fft3(&v).unwrap()).unwrap();
        let peak = v.data().iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in v.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1e-9 * peak);
        }
    }

    #[test]
    fn real_spectrum_is_hermitian() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let s = fft3(&random_volume(g, 5)).unwrap();
        assert!(s.hermitian_asymmetry() < 1e-12);
    }

    #[test]
    fn symmetrized_random_spectrum_round_trips() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw: Vec<Complex64> = (0..g.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let sym: Vec<Complex64> = (0..g.len())
            .map(|i| 0.5 * (raw[i] + raw[g.mirror_index(i)].conj()))
            .collect();
        let s = ComplexSpectrum::new(g, sym).unwrap();
        let v = ifft3(&s).unwrap();
        let back = fft3(&v).unwrap();
        for (a, b) in s.data().iter().zip(back.data()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn flat_spectrum_inverts_to_delta() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let s = ComplexSpectrum::new(g, vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
        let v = ifft3(&s).unwrap();
        assert!((v.data()[0] - 1.0).abs() < 1e-12);
        assert!(v.data()[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn conjugate_pair_inverts_to_cosine() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let mut s = ComplexSpectrum::zeros(g);
        let n = g.len() as f64;
        s.data_mut()[g.index(1, 0, 0)] = Complex64::new(n / 2.0, 0.0);
        s.data_mut()[g.index(g.nx - 1, 0, 0)] = Complex64::new(n / 2.0, 0.0);
        let v = ifft3(&s).unwrap();
        for z in 0..g.nz {
            for y in 0..g.ny {
                for x in 0..g.nx {
                    let want = (std::f64::consts::TAU * x as f64 / g.nx as f64).cos();
                    assert!((v.get(x, y, z) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_hermitian_spectrum_rejected() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let mut s = ComplexSpectrum::zeros(g);
        s.data_mut()[g.index(1, 0, 0)] = Complex64::new(1.0, 0.0);
        match ifft3(&s) {
            Err(TsimError::NonHermitian { max_asymmetry }) => assert!(max_asymmetry > 0.5),
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let mut d = vec![0.0; g.len()];
        d[17] = f64::NAN;
        assert!(matches!(
            RealVolume::new(g, d),
            Err(TsimError::NonFinite { index: 17 })
        ));
    }

    #[test]
    fn frequency_axes() {
        let g = GridSpec::cubic(8, 1000.0).unwrap();
        let ax = freq_axes(&g);
        let want = [0.0, 0.125, 0.25, 0.375, -0.5, -0.375, -0.25, -0.125];
        for (a, b) in ax.x.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }

        let g = GridSpec::cubic(256, 40.0).unwrap();
        let ax = freq_axes(&g);
        assert!((ax.x[1] - 0.09765625).abs() < 1e-12);
        assert!((ax.x[128].abs() - 12.5).abs() < 1e-12);
        assert!((g.nyquist_lateral() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn downsample_constant_and_delta() {
        let g = GridSpec::cubic(16, 20.0).unwrap();
        let d = downsample2(&RealVolume::constant(g, 3.0)).unwrap();
        assert_eq!(d.grid().nx, 8);
        assert_eq!(d.grid().dx_vox, 40.0);
        assert!(d.data().iter().all(|&v| (v - 3.0).abs() < 1e-15));

        let mut raw = vec![0.0; g.len()];
        raw[g.index(5, 2, 9)] = 8.0;
        let d = downsample2(&RealVolume::new(g, raw).unwrap()).unwrap();
        assert!((d.get(2, 1, 4) - 1.0).abs() < 1e-15);
        assert!((d.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn downsample_matches_block_means() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let v = random_volume(g, 21);
        let d = downsample2(&v).unwrap();
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let mut s = 0.0;
                    for k in 0..8 {
                        s += v.get(2 * x + (k & 1), 2 * y + ((k >> 1) & 1), 2 * z + (k >> 2));
                    }
                    assert!((d.get(x, y, z) - s / 8.0).abs() < 1e-15);
                }
            }
        }
        assert!((d.mean() - v.mean()).abs() < 1e-12);
    }

    #[test]
    fn normalize_clamp_examples() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let mut raw = vec![0.0; g.len()];
        raw[0] = 3.0;
        raw[1] = -4.0;
        let n = l2_normalize_clamp(&RealVolume::new(g, raw).unwrap()).unwrap();
        assert_eq!(n.data()[0], 1.0);
        assert_eq!(n.data()[1], 0.0);

        assert!(l2_normalize_clamp(&RealVolume::constant(g, -1.0)).is_err());

        let v = random_volume(g, 2);
        let n = l2_normalize_clamp(&v).unwrap();
        assert!(n.min() >= 0.0);
        assert!((n.norm_l2() - 1.0).abs() < 1e-12);
        let again = l2_normalize_clamp(&n).unwrap();
        for (a, b) in n.data().iter().zip(again.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trilinear_resample_identity_on_same_grid() {
        let g = GridSpec::cubic(8, 20.0).unwrap();
        let v = random_volume(g, 4);
        let r = resample_trilinear(&v, g).unwrap();
        for (a, b) in v.data().iter().zip(r.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
