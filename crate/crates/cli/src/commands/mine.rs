//! `mine`: one standalone triplet-mining round.


use iovpr::augment::make_gray_layout;
use iovpr::embed::read_params;
use iovpr::mining::{build_epoch_triplets, write_triplets_jsonl};
use iovpr::rng::{stage_seed, SplitMix64};
use iovpr::training::refresh_gallery;
use iovpr::LayoutKind;

use crate::args::{Cli, MineArgs};
use crate::common::{
    effective_config, layout_kind_override, load_filtered_layouts, load_gallery_features,
    load_query_images, require_file, resolve_input, CliError, CliResult,
};

pub fn run(cli: &Cli, args: &MineArgs) -> CliResult {
    let config = effective_config(cli)?;
    require_file(&args.params, "params file")?;
    let params = read_params(&args.params).map_err(|e| CliError::Data(e.into()))?;

    let layouts = if args.no_augment {
        None
    } else {
        let path = resolve_input(
            args.layouts.as_ref(),
            config.paths.layouts_manifest.as_ref(),
            "layouts",
        )
        .map_err(|_| CliError::usage("either --layouts or --no-augment is required"))?;
        let threshold = args.threshold.unwrap_or(config.window_threshold);
        let mut layouts = load_filtered_layouts(&path, threshold)?;
        if layout_kind_override(&config, args.kind) == LayoutKind::Gray {
            layouts = layouts.iter().map(make_gray_layout).collect();
        }
        Some(layouts)
    };

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
    let gallery_features = load_gallery_features(&gallery_path)?;
    let queries = load_query_images(&queries_path)?;
    let gallery = refresh_gallery(&params, &gallery_features)
        .map_err(|e| CliError::Data(e.into()))?;
    let index = gallery.build_spatial_index().map_err(|e| CliError::Data(e.into()))?;

    let mut rng = SplitMix64::new(stage_seed(config.seed, "mine"));
    let epoch = build_epoch_triplets(
        &queries,
        layouts.as_deref(),
        &gallery,
        &index,
        &params,
        &config.mining,
        &mut rng,
    )
    .map_err(|e| CliError::Data(e.into()))?;

    let triplets = epoch.triplets();
    write_triplets_jsonl(&args.out, &triplets).map_err(|e| CliError::Data(e.into()))?;
    log::info!(
        "mined {} triplets ({} queries skipped without a positive)",
        triplets.len(),
        epoch.skipped_queries
    );
    Ok(())
}
