//! `subset`: distractor-subset id lists, reusable across models.

use std::io::Write;

use anyhow::Context;

use iovpr::eval::make_distractor_subset;
use iovpr::rng::stage_seed;

use crate::args::{Cli, SubsetArgs};
use crate::common::{effective_config, load_records, resolve_input, CliError, CliResult};

pub fn run(cli: &Cli, args: &SubsetArgs) -> CliResult {
    let config = effective_config(cli)?;
    let radius = args.radius.unwrap_or(config.eval.radius_m);
    let gallery_path = resolve_input(
        args.gallery.as_ref(),
        config.paths.gallery_manifest.as_ref(),
        "gallery",
    )?;
    let queries_path = resolve_input(
        args.queries.as_ref(),
        config.paths.queries_manifest.as_ref(),
        "queries",
    )?;
    let (_, gallery_locs) = load_records(&gallery_path)?;
    let (_, query_locs) = load_records(&queries_path)?;

    let subset = make_distractor_subset(
        &gallery_locs,
        &query_locs,
        args.size,
        radius,
        stage_seed(config.seed, "subset"),
    )
    .map_err(|e| CliError::Data(e.into()))?;

    let mut f = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for id in &subset {
        writeln!(f, "{id}").context("writing ids")?;
    }
    log::info!(
        "subset of {} ids (radius {radius} m) written to {}",
        subset.len(),
        args.out.display()
    );
    Ok(())
}
