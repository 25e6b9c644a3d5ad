//! `augment`: offline compositing of queries with indoor layouts.

use anyhow::Context;

use iovpr::augment::{composite, make_gray_layout};
use iovpr::manifest::write_manifest;
use iovpr::rng::{stage_seed, SplitMix64};
use iovpr::LayoutKind;

use crate::args::{AugmentArgs, Cli};
use crate::common::{
    effective_config, layout_kind_override, load_filtered_layouts, load_query_images,
    resolve_input, CliResult,
};

pub fn run(cli: &Cli, args: &AugmentArgs) -> CliResult {
    let config = effective_config(cli)?;
    let threshold = args.threshold.unwrap_or(config.window_threshold);
    let kind = layout_kind_override(&config, args.kind);
    let queries_path = resolve_input(
        args.queries.as_ref(),
        config.paths.queries_manifest.as_ref(),
        "queries",
    )?;
    let layouts_path = resolve_input(
        args.layouts.as_ref(),
        config.paths.layouts_manifest.as_ref(),
        "layouts",
    )?;

    let mut layouts = load_filtered_layouts(&layouts_path, threshold)?;
    if kind == LayoutKind::Gray {
        layouts = layouts.iter().map(make_gray_layout).collect();
    }
    let queries = load_query_images(&queries_path)?;
    let (records, _) = crate::common::load_records(&queries_path)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut rng = SplitMix64::new(stage_seed(config.seed, "augment"));
    let mut out_records = Vec::with_capacity(queries.len());
    for (query, record) in queries.iter().zip(&records) {
        let layout = &layouts[rng.below(layouts.len() as u64) as usize];
        let composited = composite(&query.image, &layout.mask, &layout.image)
            .with_context(|| format!("compositing query {}", query.id))?;
        let name = format!("{}.png", query.id);
        composited
            .save_png(&args.out.join(&name))
            .with_context(|| format!("writing {name}"))?;
        let mut row = record.clone();
        row.image_path = name;
        out_records.push(row);
    }
    let manifest = args.out.join("augmented.jsonl");
    write_manifest(&manifest, &out_records).context("writing augmented manifest")?;
    log::info!(
        "composited {} queries with {} layouts (kind {kind:?}, threshold {threshold})",
        out_records.len(),
        layouts.len()
    );
    Ok(())
}
