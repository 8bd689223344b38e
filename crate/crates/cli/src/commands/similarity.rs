use std::path::Path;

use anyhow::Context;

use petrel_core::corpus::Corpus;
use petrel_core::domainsim::{
    cache_path, corpus_hash, load_profile, rank_sources, save_profile, top_vocab, StopwordList,
    VocabProfile,
};

use super::{CliResult, ExitCode, ExitCtx};

/// Tokenizes a corpus file for profiling: canonical JSON corpora contribute
/// their token surfaces, anything else is treated as whitespace-separated
/// plain text with edge punctuation stripped.
fn corpus_tokens(path: &Path) -> Result<(String, Vec<String>), super::CliError> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .or_exit(ExitCode::Data)?;
    let tokens = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let corpus = Corpus::from_json(&raw).or_exit(ExitCode::Data)?;
        corpus
            .sentences()
            .flat_map(|s| s.tokens.iter().map(|t| t.surface.clone()))
            .collect()
    } else {
        raw.split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
            .filter(|w| !w.is_empty())
            .collect()
    };
    Ok((corpus_hash(&raw), tokens))
}

fn profile(
    path: &Path,
    n: usize,
    stopwords: &StopwordList,
    cache_dir: Option<&Path>,
) -> Result<VocabProfile, super::CliError> {
    let (hash, tokens) = corpus_tokens(path)?;
    if let Some(dir) = cache_dir {
        let cached = cache_path(dir, &hash, n, &stopwords.id);
        if cached.exists() {
            if let Ok(profile) = load_profile(&cached) {
                log::info!("profile cache hit: {}", cached.display());
                return Ok(profile);
            }
        }
    }
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    let profile = top_vocab(id, tokens.into_iter(), n, stopwords).or_exit(ExitCode::Data)?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).or_exit(ExitCode::Data)?;
        save_profile(&cache_path(dir, &hash, n, &stopwords.id), &profile)
            .or_exit(ExitCode::Data)?;
    }
    Ok(profile)
}

pub fn run(
    target: &Path,
    sources: &[std::path::PathBuf],
    n: usize,
    stopwords: Option<&Path>,
    cache_dir: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let stopword_list = match stopwords {
        Some(path) => StopwordList::load(path).or_exit(ExitCode::Data)?,
        None => StopwordList::default_english(),
    };
    let target_profile = profile(target, n, &stopword_list, cache_dir)?;
    let mut source_profiles = Vec::new();
    for source in sources {
        source_profiles.push(profile(source, n, &stopword_list, cache_dir)?);
    }
    let ranking = rank_sources(&target_profile, &source_profiles).or_exit(ExitCode::Data)?;

    println!("vocabulary overlap with {} (top {}):", ranking.target_id, n);
    println!("{:<28} {:>10}", "source", "overlap %");
    for (id, pct) in &ranking.entries {
        println!("{id:<28} {pct:>10.1}");
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&ranking).or_exit(ExitCode::Data)?)
            .or_exit(ExitCode::Data)?;
    }
    Ok(())
}
