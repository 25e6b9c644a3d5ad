//! `train`: margin ranking loss over mined triplets.

use anyhow::Context;

use iovpr::augment::make_gray_layout;
use iovpr::embed::{init_params, write_params, FEATURE_DIM};
use iovpr::rng::stage_seed;
use iovpr::training::train;
use iovpr::LayoutKind;

use crate::args::{Cli, TrainArgs};
use crate::common::{
    effective_config, layout_kind_override, load_filtered_layouts, load_gallery_features,
    load_query_images, resolve_input, CliError, CliResult,
};

pub fn run(cli: &Cli, args: &TrainArgs) -> CliResult {
    let config = effective_config(cli)?;
    let mut loss = config.loss;
    loss.seed = config.seed;
    if let Some(epochs) = args.epochs {
        loss.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        loss.learning_rate = lr;
    }
    if let Some(margin) = args.margin {
        loss.margin = margin;
    }
    if let Some(batch) = args.batch_size {
        loss.batch_size = batch;
    }
    let mut mining = config.mining;
    mining.num_negatives = loss.num_negatives;
    let embed_dim = args.embed_dim.unwrap_or(iovpr::embed::DEFAULT_EMBED_DIM);

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
    let gallery = load_gallery_features(&gallery_path)?;
    let queries = load_query_images(&queries_path)?;

    let init = init_params(stage_seed(config.seed, "embedder-init"), FEATURE_DIM, embed_dim);
    let (params, report) = train(&queries, &gallery, layouts.as_deref(), &loss, &mining, init)
        .map_err(|e| CliError::Data(e.into()))?;

    write_params(&args.out_params, &params).map_err(|e| CliError::Data(e.into()))?;
    if let Some(report_path) = &args.report {
        report.write_csv(report_path).context("writing report")?;
    }
    for e in &report.epochs {
        log::info!(
            "epoch {}: mean loss {:.6}, skipped {}, checksum {:016x}",
            e.epoch,
            e.mean_loss,
            e.skipped_queries,
            e.param_checksum
        );
    }
    log::info!("wrote params to {}", args.out_params.display());
    Ok(())
}
