//! Sweeps modulation settings and noise levels in parallel and prints the CSV.

use tsim::cli::{cmd_sweep, AlphaChoice, AlphaKeyword, RunConfig, SweepOptions, SweepPoint};
use tsim::forward::{PhantomSpec, Snr};
use tsim::grid::GridSpec;

fn main() -> tsim::Result<()> {
    let fine = GridSpec::cubic(64, 40.0)?;
    let cfg = RunConfig {
        phantom: PhantomSpec {
            spoke_length: 1.2,
            ..PhantomSpec::default()
        },
        fine_grid: fine,
        data_grid: fine.downsampled()?,
        snr_db: vec![Snr::Infinite, Snr::Db(15.0)],
        alphas: vec![AlphaChoice::Keyword(AlphaKeyword::Auto), AlphaChoice::Value(1e-6)],
        sweep: vec![
            SweepPoint { um_ratio: 0.5, l_mm: 3.8 },
            SweepPoint { um_ratio: 0.8, l_mm: 2.4 },
        ],
        output_dir: std::env::temp_dir().join("tsim_sweep_example"),
        ..RunConfig::desk(0.75, 2.7)
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (path, _) = cmd_sweep(
        &cfg,
        SweepOptions {
            workers,
            record_runtime: true,
        },
    )?;
    print!("{}", std::fs::read_to_string(&path).map_err(|e| tsim::TsimError::io(&path, e))?);
    Ok(())
}
