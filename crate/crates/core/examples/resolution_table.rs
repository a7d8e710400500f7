//! Analytic cutoffs and predicted resolution across modulation settings.
//!
//! ```text
//! cargo run --example resolution_table
//! ```

use tsim::optics::{predict_resolution, OpticalConfig};

fn main() -> tsim::Result<()> {
    println!("u_m/u_c  L(mm)  u_c    w_c    w_eff  w_eff/w_c  dx_SIM  dz_SIM");
    for (ratio, l) in [(0.5, 3.8), (0.75, 2.7), (0.8, 2.4), (0.9, 1.5), (0.95, 0.8)] {
        let cfg = OpticalConfig::standard(ratio, l);
        let p = predict_resolution(&cfg)?;
        println!(
            "{ratio:<8} {l:<6} {:.3}  {:.3}  {:.3}  {:<9.3}  {:<6.0}  {:.0}",
            p.u_c,
            p.w_c,
            p.w_eff,
            p.w_eff / p.w_c,
            p.dx_sim,
            p.dz_sim
        );
    }
    let wf = predict_resolution(&OpticalConfig::standard(0.75, 2.7))?;
    println!("widefield: dx {:.0} nm, dz {:.0} nm", wf.dx, wf.dz);
    Ok(())
}
