//! Generates a synthetic-city dataset on disk for trying out the CLI:
//! gallery tiles, raw training queries, composited (indoor-looking) test
//! queries with window masks, and an indoor layout set.
//!
//! Usage: `cargo run -p iovpr --example synthetic_city -- <out_dir> [seed] [--full]`
//!
//! The default is a small city (150 gallery tiles); `--full` writes the
//! 2000-tile city used by the end-to-end acceptance experiment.

use iovpr::fixtures::{write_city_to_dir, SyntheticCity, SyntheticCityConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out_dir = match args.first() {
        Some(d) => std::path::PathBuf::from(d),
        None => {
            eprintln!("usage: synthetic_city <out_dir> [seed] [--full]");
            std::process::exit(1);
        }
    };
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let full = args.iter().any(|a| a == "--full");

    let config = if full {
        SyntheticCityConfig { seed, ..SyntheticCityConfig::default() }
    } else {
        SyntheticCityConfig::mini(seed)
    };
    println!(
        "generating city: {} gallery tiles, {} train queries, {} test queries, {} layouts",
        config.gallery_size(),
        config.train_queries,
        config.test_queries,
        config.layout_count
    );
    let city = SyntheticCity::generate(config);
    std::fs::create_dir_all(&out_dir).expect("create output dir");
    let written = write_city_to_dir(&city, &out_dir).expect("write city");
    println!("gallery manifest:       {}", written.gallery_manifest.display());
    println!("train queries manifest: {}", written.train_queries_manifest.display());
    println!("test queries manifest:  {}", written.test_queries_manifest.display());
    println!("layouts manifest:       {}", written.layouts_manifest.display());
    println!("query masks:            {}", written.masks_dir.display());
}
