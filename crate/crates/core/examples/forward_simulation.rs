//! Simulates the nine raw TSIM images of the star and saves them with a manifest.

use tsim::forward::{make_star, simulate, AcquisitionSet, PhantomSpec};
use tsim::grid::GridSpec;
use tsim::illumination::PatternConfig;
use tsim::optics::OpticalConfig;

fn main() -> tsim::Result<()> {
    let optics = OpticalConfig::standard(0.8, 2.4);
    let pattern = PatternConfig::from_optics(&optics);
    let fine = GridSpec::cubic(128, 20.0)?;
    let phantom = PhantomSpec {
        spoke_length: 1.2,
        ..PhantomSpec::default()
    };
    let truth = make_star(&phantom, &fine)?;
    let acq = simulate(&truth, &optics, &pattern, &fine.downsampled()?)?;

    for (img, meta) in acq.images.iter().zip(&acq.meta) {
        println!(
            "orientation {:>5.1}°  phase {:.3} rad  mean {:.4e}",
            meta.orientation_deg,
            meta.phase_rad,
            img.mean()
        );
    }
    let dir = std::env::temp_dir().join("tsim_forward_example");
    acq.save(&dir, None)?;
    let back = AcquisitionSet::load(&dir)?;
    println!("saved and reloaded {} images from {}", back.images.len(), dir.display());
    Ok(())
}
