//! Axial visibility of the tunable pattern and the phase-mixing matrix.

use tsim::grid::GridSpec;
use tsim::illumination::{mixing_matrix, pattern_value, visibility, visibility_profile, PatternConfig};
use tsim::optics::OpticalConfig;

fn main() -> tsim::Result<()> {
    let optics = OpticalConfig::standard(0.75, 2.7);
    let pattern = PatternConfig::from_optics(&optics);
    pattern.check_against(&optics)?;
    println!(
        "u_m {:.3} cycles/µm, source L {} mm, axial extension {:.3} cycles/µm",
        pattern.u_m,
        pattern.source_l,
        optics.axial_extension()
    );

    println!("z (nm)   sinc V    sampled V");
    let grid = GridSpec::new(32, 32, 64, 40.0, 100.0)?;
    let prof = visibility_profile(&pattern, &optics, &grid);
    for k in (0..grid.nz / 2).step_by(4) {
        let z = prof.z_nm[k];
        println!("{z:<8.0} {:<9.4} {:.4}", visibility(&optics, z), prof.v[k]);
    }

    print!("I(x, z=0) over one period:");
    let period_nm = 1e3 / pattern.u_m;
    for s in 0..8 {
        let x = s as f64 * period_nm / 8.0;
        print!(" {:.2}", pattern_value(&pattern, &optics, (x, 0.0), 0.0, 0.0, 0.0));
    }
    println!();

    let m = mixing_matrix(&pattern.phases)?;
    println!("mixing matrix condition number {:.3}", m.condition);
    Ok(())
}
