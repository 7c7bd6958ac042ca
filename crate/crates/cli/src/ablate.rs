use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use vocalsep::data::wav_files;
use vocalsep::dsp::{read_wav, StftEngine};
use vocalsep::objective::LossTerm;
use vocalsep::train::TrainingConfig;

use crate::manifest::Metrics;
use crate::separate::{write_outputs, Model};
use crate::train::{self, fresh_dir};
use crate::{user_error, Cli, Precision};

pub const TABLE: &str = "ablation.csv";

/// Parses `--losses` into labelled runs, always led by `all`.
fn plan(losses: &[String]) -> anyhow::Result<Vec<(String, Vec<LossTerm>)>> {
    let mut runs = vec![("all".to_string(), Vec::new())];
    for name in losses.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let terms = if name == "gan_both" {
            vec![LossTerm::GanC, LossTerm::GanA]
        } else {
            match name.parse::<LossTerm>() {
                Ok(t) => vec![t],
                Err(_) => {
                    let valid: Vec<&str> = LossTerm::ALL.iter().map(|t| t.name()).chain(["gan_both"]).collect();
                    return Err(user_error(format!("unknown loss `{name}`; expected one of {}", valid.join(", "))));
                }
            }
        };
        let label = format!("wo_{name}");
        if runs.iter().any(|(l, _)| *l == label) {
            continue;
        }
        runs.push((label, terms));
    }
    Ok(runs)
}

pub fn run(
    cli: &Cli,
    cfg: &TrainingConfig,
    precision: Precision,
    data: &Path,
    out: &Path,
    losses: &[String],
) -> anyhow::Result<()> {
    let runs = plan(losses)?;
    let references = data.join("references");
    if !references.is_dir() {
        return Err(user_error(format!("{} is missing; ablation needs vocal references", references.display())));
    }
    fresh_dir(out, cli.force)?;
    let engine = StftEngine::new(cfg.stft_config())?;
    let mixtures = wav_files(&data.join("mixtures"))?;
    let mut table = String::from("run,disabled,median_sdr,median_sir\n");
    let mut rows = Vec::new();
    for (label, terms) in &runs {
        let mut run_cfg = cfg.clone();
        run_cfg.disabled_losses.extend(terms.iter().copied());
        log::info!("ablation run `{label}`");
        let run_dir = out.join(label);
        let trained = train::start(&run_cfg, precision, data, &run_dir, false)?;
        let model = Model::load(&run_dir.join(&trained.final_checkpoint), Some(&run_cfg))?;
        let estimates = run_dir.join("estimates");
        for path in &mixtures {
            let name = path.file_name().expect("listed files have names");
            let audio = read_wav(path).with_context(|| format!("cannot read {}", path.display()))?;
            let sep = model.separate(&engine, &audio)?;
            write_outputs(&sep, &estimates.join(name), &run_dir.join("instrumentals").join(name))?;
        }
        let report = crate::evaluate::run(&estimates, &references, Some(&data.join("mixtures")), cfg.eval_filter_len)?;
        let report_path = run_dir.join("report.csv");
        std::fs::write(&report_path, report.to_csv())?;
        trained.finalize(Some(Metrics {
            median_sdr: report.median_sdr,
            median_sir: report.median_sir,
            tracks: report.items.len(),
            report: "report.csv".into(),
        }))?;
        let disabled: Vec<&str> = run_cfg.disabled_losses.iter().map(|t| t.name()).collect();
        let _ = writeln!(table, "{label},{},{:.6},{:.6}", disabled.join(" "), report.median_sdr, report.median_sir);
        rows.push((label.clone(), report.median_sdr, report.median_sir));
    }
    std::fs::write(out.join(TABLE), &table)?;
    println!("{:<12} {:>10} {:>10}", "run", "SDR (dB)", "SIR (dB)");
    for (label, sdr, sir) in rows {
        println!("{label:<12} {sdr:>10.2} {sir:>10.2}");
    }
    Ok(())
}
