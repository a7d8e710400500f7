//! Adds Poisson noise at a target SNR and checks the noise level against the
//! photon scale.

use tsim::forward::{add_poisson, measure_snr_db, photon_scale, Snr};
use tsim::grid::{GridSpec, RealVolume};

fn main() -> tsim::Result<()> {
    let grid = GridSpec::cubic(64, 40.0)?;
    let clean = RealVolume::from_fn(grid, |x, y, z| {
        let (px, py, pz) = grid.centered_position(x, y, z);
        1.0 + 0.5 * (px * 0.01).cos() * (-(py * py + pz * pz) / 4e5).exp()
    })?;
    let mean_sqrt = clean.data().iter().map(|v| v.sqrt()).sum::<f64>() / grid.len() as f64;

    println!("SNR (dB)  photons/unit  counts SNR  noise var / predicted");
    for db in [30.0, 20.0, 15.0] {
        let scale = photon_scale(mean_sqrt, db)?;
        let noisy = add_poisson(&clean, Snr::Db(db), 7)?;
        // Poisson counts on scale·v have variance scale·v, i.e. v/scale after rescaling.
        let (mut var, mut pred) = (0.0, 0.0);
        for (n, c) in noisy.data().iter().zip(clean.data()) {
            var += (n - c).powi(2);
            pred += c / scale;
        }
        println!(
            "{db:<9} {scale:<13.2} {:<11.2} {:.4}",
            measure_snr_db(&clean.scaled(scale))?,
            var / pred
        );
    }
    let same = add_poisson(&clean, Snr::Infinite, 7)?;
    println!("infinite SNR leaves the volume unchanged: {}", same == clean);
    Ok(())
}
