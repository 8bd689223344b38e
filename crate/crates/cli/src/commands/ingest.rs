use std::path::Path;

use anyhow::{anyhow, Context};
use petrel_core::corpus::annotator::FallbackAnnotator;
use petrel_core::corpus::standoff::parse_standoff;
use petrel_core::corpus::{to_canonical, Corpus};

use super::{fail, CliResult, ExitCode, ExitCtx};

pub fn run(in_dir: &Path, out_file: &Path) -> CliResult {
    let mut stems: Vec<String> = Vec::new();
    let entries = std::fs::read_dir(in_dir)
        .with_context(|| format!("cannot read {}", in_dir.display()))
        .or_exit(ExitCode::Data)?;
    for entry in entries {
        let entry = entry.or_exit(ExitCode::Data)?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("ann") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        return fail(ExitCode::Data, anyhow!("no .ann files in {}", in_dir.display()));
    }

    let annotator = FallbackAnnotator;
    let mut documents = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for stem in &stems {
        let ann_path = in_dir.join(format!("{stem}.ann"));
        let txt_path = in_dir.join(format!("{stem}.txt"));
        let result = (|| -> anyhow::Result<_> {
            let txt = std::fs::read_to_string(&txt_path)
                .with_context(|| format!("missing {}", txt_path.display()))?;
            let ann = std::fs::read_to_string(&ann_path)?;
            let raw = parse_standoff(stem, &txt, &ann)?;
            Ok(to_canonical(&raw, &annotator)?)
        })();
        match result {
            Ok(doc) => documents.push(doc),
            Err(e) => failures.push(format!("{stem}: {e:#}")),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        return fail(
            ExitCode::Data,
            anyhow!("{} of {} documents failed to ingest", failures.len(), stems.len()),
        );
    }

    let corpus = Corpus::new(documents);
    corpus.save(out_file).or_exit(ExitCode::Data)?;
    println!(
        "documents: {}\nsentences: {}\nevents: {}\narguments: {}",
        corpus.n_documents(),
        corpus.n_sentences(),
        corpus.n_events(),
        corpus.n_arguments()
    );
    Ok(())
}
