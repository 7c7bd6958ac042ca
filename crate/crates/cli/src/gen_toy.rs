use std::path::Path;

use anyhow::Context;
use vocalsep::data::{make_toy_corpus, ToyCounts};
use vocalsep::dsp::{write_wav, AudioClip, StftConfig, WavEncoding};

use crate::train::fresh_dir;
use crate::{user_error, Cli};

pub fn run(cli: &Cli, out: &Path, mixtures: usize, sources: usize, clips: usize) -> anyhow::Result<()> {
    if mixtures == 0 && sources == 0 {
        return Err(user_error("nothing to generate: --mixtures and --sources are both 0"));
    }
    if clips == 0 {
        return Err(user_error("--clips must be at least 1"));
    }
    let cfg = StftConfig::toy();
    let seed = cli.seed.unwrap_or(0);
    let corpus = make_toy_corpus(seed, ToyCounts { mixtures, sources, clips_per_track: clips }, &cfg);
    fresh_dir(out, cli.force)?;
    let write = |dir: &str, name: &str, clip: &AudioClip| -> anyhow::Result<()> {
        let path = out.join(dir).join(name);
        std::fs::create_dir_all(out.join(dir))?;
        write_wav(&path, clip, WavEncoding::Float32).with_context(|| format!("cannot write {}", path.display()))
    };
    for t in &corpus.tracks {
        write("mixtures", &t.name, &t.mixture)?;
        write("references", &t.name, &t.vocals)?;
    }
    for (name, clip) in &corpus.sources {
        write("instrumentals", name, clip)?;
    }
    log::info!(
        "wrote {} mixtures, {} instrumentals ({} clips each, seed {seed}) to {}",
        corpus.tracks.len(),
        corpus.sources.len(),
        clips,
        out.display()
    );
    Ok(())
}
