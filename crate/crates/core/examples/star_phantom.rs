//! Builds the 3D Siemens-star phantom and writes it as a TVOL file.
//!
//! ```text
//! cargo run --example star_phantom -- /tmp/star.tvol
//! ```

use std::path::PathBuf;

use tsim::forward::{make_star, PhantomSpec};
use tsim::grid::GridSpec;
use tsim::tvol::{self, DType};

fn main() -> tsim::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("star.tvol"));
    let spec = PhantomSpec::desk();
    let grid = GridSpec::cubic(256, 20.0)?;
    let star = make_star(&spec, &grid)?;

    let filled = star.data().iter().filter(|&&v| v > 0.0).count();
    println!(
        "{} spokes, period {:.1}°, fill fraction {:.3}",
        spec.spokes_total,
        spec.period_deg(),
        filled as f64 / grid.len() as f64
    );
    for d in [130.0, 300.0, 500.0] {
        println!("spacing {d} nm at radius {:.0} nm", spec.radius_for_spacing(d));
    }
    tvol::write_real(&out, &star, DType::F32)?;
    println!("wrote {}", out.display());
    Ok(())
}
