//! `coverage-select`: DBSCAN-based panorama subsampling.

use std::collections::BTreeSet;
use std::io::Write;

use anyhow::Context;

use iovpr::geo::{dbscan, select_representatives, DEFAULT_DBSCAN_MIN_PTS};

use crate::args::{Cli, CoverageSelectArgs};
use crate::common::{load_records, CliError, CliResult};

pub fn run(_cli: &Cli, args: &CoverageSelectArgs) -> CliResult {
    let (records, _) = load_records(&args.manifest)?;

    // One location per panorama (tile rows share their panorama's location);
    // rows without a pano id stand for themselves.
    let mut seen = BTreeSet::new();
    let mut panos = Vec::new();
    for r in &records {
        let pano_id = r.pano_id.clone().unwrap_or_else(|| r.id.to_string());
        if seen.insert(pano_id.clone()) {
            panos.push((pano_id, r.location().expect("validated at load")));
        }
    }

    let labels = dbscan(&panos, args.eps, DEFAULT_DBSCAN_MIN_PTS)
        .map_err(|e| CliError::Data(anyhow::anyhow!("dbscan: {e}")))?;
    let selected = select_representatives(&labels);

    let mut f = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for id in &selected {
        writeln!(f, "{id}").context("writing ids")?;
    }
    log::info!(
        "selected {} representatives from {} panoramas (eps {} m)",
        selected.len(),
        panos.len(),
        args.eps
    );
    Ok(())
}
