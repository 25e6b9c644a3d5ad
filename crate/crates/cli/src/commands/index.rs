//! `index`: offline feature extraction into an embedding store.

use iovpr::embed::{embed_features, read_params};
use iovpr::retrieval::{
    build_index, pruned_recall_vs_exact, write_embedding_store, ExactnessMode,
};
use iovpr::rng::{stage_seed, SplitMix64};

use crate::args::{Cli, IndexArgs, IndexModeArg};
use crate::common::{
    effective_config, load_gallery_features, require_file, resolve_input, CliError, CliResult,
};

pub fn run(cli: &Cli, args: &IndexArgs) -> CliResult {
    let config = effective_config(cli)?;
    require_file(&args.params, "params file")?;
    let params = read_params(&args.params).map_err(|e| CliError::Data(e.into()))?;
    let gallery_path = resolve_input(
        args.gallery.as_ref(),
        config.paths.gallery_manifest.as_ref(),
        "gallery",
    )?;
    let gallery = load_gallery_features(&gallery_path)?;

    let items: Vec<(iovpr::ItemId, iovpr::Embedding)> = gallery
        .iter()
        .map(|g| (g.id, embed_features(&params, &g.features).0))
        .collect();
    write_embedding_store(&args.out, &items).map_err(|e| CliError::Data(e.into()))?;
    log::info!("wrote {} embeddings to {}", items.len(), args.out.display());

    if args.mode == IndexModeArg::Pruned {
        // Report how much recall the pruned path trades away on this data,
        // probing with a seeded sample of the gallery's own embeddings.
        let index = build_index(
            &items,
            ExactnessMode::Pruned {
                partitions: args.partitions,
                probes: args.probes,
                seed: stage_seed(config.seed, "index-kmeans"),
            },
        )
        .map_err(|e| CliError::Data(e.into()))?;
        let mut rng = SplitMix64::new(stage_seed(config.seed, "index-recall"));
        let mut order: Vec<usize> = (0..items.len()).collect();
        rng.partial_shuffle(&mut order, 100.min(items.len()));
        let queries: Vec<iovpr::Embedding> = order[..100.min(items.len())]
            .iter()
            .map(|&i| items[i].1.clone())
            .collect();
        let k = 100.min(items.len());
        let stats = pruned_recall_vs_exact(&index, &queries, k)
            .map_err(|e| CliError::Data(e.into()))?;
        log::info!(
            "pruned mode ({} partitions, {} probes): recall@{k} vs exact = {:.4} over {} queries",
            args.partitions,
            args.probes,
            stats.mean_recall,
            stats.query_count
        );
        println!(
            "pruned_recall@{k} {:.4} partitions {} probes {}",
            stats.mean_recall, args.partitions, args.probes
        );
    }
    Ok(())
}
