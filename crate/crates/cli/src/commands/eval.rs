//! `eval`: Recall@K-within-radius against an embedding store.

use std::collections::BTreeSet;

use anyhow::Context;

use iovpr::augment::{gray_composite_query, FileMaskProvider, MaskProvider};
use iovpr::embed::{embed_features, extract_features, read_params};
use iovpr::eval::{emit_report, recall_at_k, ReportFormat};
use iovpr::retrieval::{batch_query_topk, build_index, write_rankings_jsonl, ExactnessMode};
use iovpr::ItemId;

use crate::args::{Cli, EvalArgs, LayoutKindArg, ReportFormatArg};
use crate::common::{
    effective_config, load_query_images, load_records, require_file, resolve_input, CliError,
    CliResult,
};

pub fn run(cli: &Cli, args: &EvalArgs) -> CliResult {
    let config = effective_config(cli)?;
    let mut eval_config = config.eval.clone();
    if let Some(radius) = args.radius {
        eval_config.radius_m = radius;
    }
    if let Some(k_set) = &args.k_set {
        eval_config.k_set = k_set
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::usage(format!("bad --k-set {k_set}")))?;
    }
    eval_config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;

    require_file(&args.store, "embedding store")?;
    require_file(&args.params, "params file")?;
    let params = read_params(&args.params).map_err(|e| CliError::Data(e.into()))?;
    let mut store = iovpr::retrieval::read_embedding_store(&args.store)
        .map_err(|e| CliError::Data(e.into()))?;

    if let Some(subset_path) = &args.subset {
        require_file(subset_path, "subset id file")?;
        let text = std::fs::read_to_string(subset_path).context("reading subset ids")?;
        let keep: BTreeSet<ItemId> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<u64>().map(ItemId))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Data(anyhow::anyhow!("bad subset id: {e}")))?;
        store.retain(|(id, _)| keep.contains(id));
        log::info!("gallery restricted to {} subset items", store.len());
    }
    if store.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("embedding store is empty after filtering")));
    }

    // Gallery ground-truth locations for the items actually in the store.
    let gallery_path = resolve_input(
        args.gallery.as_ref(),
        config.paths.gallery_manifest.as_ref(),
        "gallery",
    )?;
    let (_, gallery_locs_all) = load_records(&gallery_path)?;
    let gallery_locs: std::collections::BTreeMap<ItemId, iovpr::GeoPoint> = store
        .iter()
        .map(|(id, _)| {
            gallery_locs_all
                .get(id)
                .copied()
                .map(|loc| (*id, loc))
                .ok_or_else(|| anyhow::anyhow!("store id {id} missing from gallery manifest"))
        })
        .collect::<Result<_, _>>()?;

    let queries_path = resolve_input(
        args.queries.as_ref(),
        config.paths.queries_manifest.as_ref(),
        "queries",
    )?;
    let queries = load_query_images(&queries_path)?;
    let (_, query_locs) = load_records(&queries_path)?;

    // Inference scenario 2: predict the window mask, gray out the rest.
    let mask_provider: Option<FileMaskProvider> = match args.layout_kind {
        LayoutKindArg::Real => None,
        LayoutKindArg::Gray => {
            let dir = args.masks.as_ref().ok_or_else(|| {
                CliError::usage("--layout-kind gray requires --masks <dir>")
            })?;
            Some(FileMaskProvider::new(dir))
        }
    };

    let embedded: Result<Vec<(ItemId, iovpr::Embedding)>, anyhow::Error> = queries
        .iter()
        .map(|q| {
            let image = match &mask_provider {
                None => q.image.clone(),
                Some(provider) => {
                    let mask = provider
                        .window_mask(&q.id.to_string(), &q.image)
                        .with_context(|| format!("mask for query {}", q.id))?;
                    gray_composite_query(&q.image, &mask)
                        .with_context(|| format!("graying query {}", q.id))?
                }
            };
            let features =
                extract_features(&image).with_context(|| format!("features for query {}", q.id))?;
            Ok((q.id, embed_features(&params, &features).0))
        })
        .collect();
    let embedded = embedded?;

    let index = build_index(&store, ExactnessMode::Exact).map_err(|e| CliError::Data(e.into()))?;
    let max_k = *eval_config.k_set.last().expect("validated");
    let rankings = batch_query_topk(&index, &embedded, max_k)
        .map_err(|e| CliError::Data(e.into()))?;

    if let Some(rankings_path) = &args.rankings {
        write_rankings_jsonl(rankings_path, &rankings).map_err(|e| CliError::Data(e.into()))?;
    }

    let report = recall_at_k(&rankings, &query_locs, &gallery_locs, &eval_config, &args.model)
        .map_err(|e| CliError::Data(e.into()))?;
    let format = match args.format {
        ReportFormatArg::Csv => ReportFormat::Csv,
        ReportFormatArg::Json => ReportFormat::Json,
    };
    let text = emit_report(&report, format);
    std::fs::write(&args.out, &text)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print!("{text}");
    if format == ReportFormat::Json {
        println!();
    }
    Ok(())
}
