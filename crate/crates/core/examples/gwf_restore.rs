//! Simulates a noisy acquisition and restores it with the generalized Wiener filter.

use tsim::forward::{make_star, simulate, PhantomSpec, Snr};
use tsim::grid::{l2_normalize_clamp, GridSpec};
use tsim::gwf::{restore_raw, Apodization, GwfParams};
use tsim::illumination::PatternConfig;
use tsim::optics::OpticalConfig;

fn main() -> tsim::Result<()> {
    let optics = OpticalConfig::standard(0.75, 2.7);
    let pattern = PatternConfig::from_optics(&optics);
    let fine = GridSpec::cubic(128, 20.0)?;
    let phantom = PhantomSpec {
        spoke_length: 1.2,
        ..PhantomSpec::default()
    };
    let truth = make_star(&phantom, &fine)?;
    let snr = Snr::Db(20.0);
    let acq = simulate(&truth, &optics, &pattern, &fine.downsampled()?)?.with_noise(snr, 1)?;

    for apodization in [Apodization::Off, Apodization::Triangle] {
        let params = GwfParams {
            apodization,
            ..GwfParams::new(snr.default_alpha())
        };
        let (raw, log) = restore_raw(&acq, &params)?;
        let restored = l2_normalize_clamp(&raw)?;
        println!(
            "{apodization:?}: alpha {:e}, {}³ -> {}³, {:.2} s, restored max {:.4}",
            log.alpha,
            log.data_grid.nx,
            log.output_grid.nx,
            log.elapsed_s,
            restored.max()
        );
        for e in &log.band_energy {
            println!("  {:>5.1}°  |D0|² {:.3e}  |D+|² {:.3e}", e.orientation_deg, e.d0, e.d_plus);
        }
    }
    Ok(())
}
