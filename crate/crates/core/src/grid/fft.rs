//! Unnormalized 3D complex FFT over x-fastest volumes.
//!
//! Axes are transformed one at a time: x in place, y through a per-slab
//! transpose, z through a full transpose so every 1D pass runs on
//! contiguous rows.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut guard = planner.lock().unwrap_or_else(|e| e.into_inner());
    let fdir = match dir {
        Direction::Forward => FftDirection::Forward,
        Direction::Inverse => FftDirection::Inverse,
    };
    guard.plan_fft(len, fdir)
}

const BLOCK: usize = 32;

/// `src` is `rows × cols` row-major; `dst` receives `cols × rows`.
pub(crate) fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    for rb in (0..rows).step_by(BLOCK) {
        let r_end = (rb + BLOCK).min(rows);
        for cb in (0..cols).step_by(BLOCK) {
            let c_end = (cb + BLOCK).min(cols);
            for r in rb..r_end {
                for c in cb..c_end {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Transforms every contiguous row of length `len` in `data`.
fn fft_rows(data: &mut [Complex64], len: usize, dir: Direction) {
    if len <= 1 {
        return;
    }
    let fft = plan(len, dir);
    // Batch rows so each rayon task amortizes its scratch allocation.
    let rows_per_task = (1 << 16) / len.max(1) + 1;
    data.par_chunks_mut(len * rows_per_task).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// 2D transform of every `nx × ny` plane stacked in `data`.
pub(crate) fn fft2_planes(data: &mut [Complex64], nx: usize, ny: usize, dir: Direction) {
    assert_eq!(data.len() % (nx * ny), 0, "buffer is not a stack of planes");
    fft_rows(data, nx, dir);
    if ny > 1 {
        let fft_y = plan(ny, dir);
        data.par_chunks_mut(nx * ny).for_each(|slab| {
            let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft_y.get_inplace_scratch_len()];
            transpose(slab, &mut t, ny, nx);
            fft_y.process_with_scratch(&mut t, &mut scratch);
            transpose(&t, slab, nx, ny);
        });
    }
}

pub(crate) fn fft3_inplace(data: &mut [Complex64], grid: &GridSpec, dir: Direction) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    assert_eq!(data.len(), nx * ny * nz, "buffer does not match grid");

    fft2_planes(data, nx, ny, dir);

    if nz > 1 {
        let plane = nx * ny;
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, nz, plane);
        fft_rows(&mut t, nz, dir);
        transpose(&t, data, plane, nz);
    }
}
