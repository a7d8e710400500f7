//! Builds a run configuration, validates it and prints the JSON a CLI run would read.

use tsim::cli::RunConfig;

fn main() -> tsim::Result<()> {
    let cfg = RunConfig::desk(0.8, 2.4);
    cfg.validate()?;
    let json = serde_json::to_string_pretty(&cfg)?;
    println!("{json}");
    let back = RunConfig::from_json(&json)?;
    println!("config sha256 {}", back.hash());
    assert_eq!(back.hash(), cfg.hash());
    Ok(())
}
