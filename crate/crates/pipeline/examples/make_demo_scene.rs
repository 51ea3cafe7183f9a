//! Writes the synthetic demo scene into the directory given as the first
//! argument (default `demo_scene`).

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("demo_scene"));
    let manifest = hybridsim_pipeline::fixture::write_demo_scene(&dir)?;
    println!("{}", manifest.display());
    Ok(())
}
