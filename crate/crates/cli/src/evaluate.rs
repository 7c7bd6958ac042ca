use std::path::Path;

use anyhow::Context;
use vocalsep::bss::{decompose, evaluate_pair, median_report, sdr_sir, MetricReport, TrackMetrics};
use vocalsep::data::wav_files;
use vocalsep::dsp::read_wav;

use crate::user_error;

/// Scores every estimate that has a same-named reference.
pub fn run(
    estimates: &Path,
    references: &Path,
    mixtures: Option<&Path>,
    filter_len: usize,
) -> anyhow::Result<MetricReport> {
    let mut items = Vec::new();
    let mut missing = Vec::new();
    for est_path in wav_files(estimates)? {
        let name = est_path.file_name().expect("listed files have names");
        let ref_path = references.join(name);
        if !ref_path.is_file() {
            missing.push(name.to_string_lossy().into_owned());
            continue;
        }
        let est = read_wav(&est_path).with_context(|| format!("cannot read {}", est_path.display()))?;
        let target = read_wav(&ref_path).with_context(|| format!("cannot read {}", ref_path.display()))?;
        let mut len = est.len().min(target.len());
        if est.len() != target.len() {
            log::warn!("{}: estimate has {} samples, reference {}; comparing the first {len}", name.to_string_lossy(), est.len(), target.len());
        }
        let interferer = match mixtures.map(|d| d.join(name)) {
            Some(mix_path) if mix_path.is_file() => {
                let mix = read_wav(&mix_path).with_context(|| format!("cannot read {}", mix_path.display()))?;
                len = len.min(mix.len());
                Some(mix.samples[..len].iter().zip(&target.samples[..len]).map(|(m, t)| m - t).collect::<Vec<_>>())
            }
            Some(mix_path) => {
                log::warn!("{} not found; scoring {} against its reference only", mix_path.display(), name.to_string_lossy());
                None
            }
            None => None,
        };
        let id = name.to_string_lossy();
        let (e, t) = (&est.samples[..len], &target.samples[..len]);
        let item = match interferer {
            Some(i) => evaluate_pair(&id, e, t, &i, filter_len)?,
            None => {
                let m = sdr_sir(&decompose(e, &[t], 0, filter_len)?);
                TrackMetrics { id: id.into_owned(), sdr: m.sdr, sir: m.sir }
            }
        };
        items.push(item);
    }
    if !missing.is_empty() {
        log::warn!("no reference for {} estimate(s), skipped: {}", missing.len(), missing.join(", "));
    }
    if items.is_empty() {
        return Err(user_error(format!(
            "no estimate in {} has a same-named reference in {}",
            estimates.display(),
            references.display()
        )));
    }
    Ok(median_report(items)?)
}
