use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use qdtele_core::correlation::io::{write_curve_csv, write_fidelity_csv};
use qdtele_core::correlation::{WindowScanResult, CLASSICAL_BOUND};
use qdtele_core::domain::PolarizationLabel;
use qdtele_core::experiment::{analyze, simulate_inputs, TeleportOutcome};
use qdtele_core::stream::EventStream;
use qdtele_core::{Error, Result};
use serde::Serialize;

use crate::commands::read_input;
use crate::config::ExperimentConfig;
use crate::output::{Outputs, VERSION};

#[derive(Debug, Serialize)]
struct WindowSummary {
    window_ps: f64,
    effective_charlie_ps: f64,
    effective_bob_ps: f64,
    heralded: u64,
    mean_fidelity: Option<f64>,
    std_error: Option<f64>,
    sigma_vs_classical: Option<f64>,
    sigma_vs_sixstate: Option<f64>,
    per_basis: BTreeMap<String, f64>,
    all_bases_above_classical: bool,
}

#[derive(Debug, Serialize)]
struct Oscillation {
    period_ps: f64,
    period_std_error_ps: f64,
    energy_uev: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    tool_version: &'static str,
    config_hash: String,
    seed: Option<u64>,
    classical_bound: f64,
    sixstate_bound: f64,
    inputs: Vec<String>,
    /// Window with the largest significance above the classical bound.
    best_window_ps: Option<f64>,
    windows: Vec<WindowSummary>,
    oscillation: Option<Oscillation>,
}

fn stream_files(dir: &Path, label: PolarizationLabel) -> Option<PathBuf> {
    ["ttag", "csv"].iter().map(|ext| dir.join(format!("teleport_{}.{ext}", label.as_str()))).find(|p| p.is_file())
}

fn summarize(cfg: &ExperimentConfig, out: &TeleportOutcome) -> Summary {
    let a = &cfg.analysis.teleport;
    let s = &out.scan;
    let windows: Vec<WindowSummary> = (0..s.window_sizes_ps.len())
        .map(|k| {
            let per_basis: BTreeMap<String, f64> = out
                .bases
                .iter()
                .filter_map(|b| Some((b.input.as_str().to_string(), b.scan.mean_fidelity[k]?)))
                .collect();
            WindowSummary {
                window_ps: s.window_sizes_ps[k],
                effective_charlie_ps: s.effective_sizes_ps[k].0,
                effective_bob_ps: s.effective_sizes_ps[k].1,
                heralded: s.heralded[k],
                mean_fidelity: s.mean_fidelity[k],
                std_error: s.std_error[k],
                sigma_vs_classical: s.significance_vs_classical[k],
                sigma_vs_sixstate: s.significance_vs_sixstate[k],
                all_bases_above_classical: per_basis.len() == out.bases.len()
                    && per_basis.values().all(|&f| f > CLASSICAL_BOUND),
                per_basis,
            }
        })
        .collect();
    let best_window_ps = windows
        .iter()
        .filter_map(|w| Some((w.window_ps, w.sigma_vs_classical?)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|w| w.0);
    let oscillation = out.oscillation.as_ref().and_then(|r| {
        Some(Oscillation {
            period_ps: *r.derived.get("period_ps")?,
            period_std_error_ps: *r.derived_std_errors.get("period_ps")?,
            energy_uev: *r.derived.get("energy_uev")?,
            converged: r.converged,
        })
    });
    Summary {
        tool_version: VERSION,
        config_hash: cfg.hash(),
        seed: cfg.seed(),
        classical_bound: CLASSICAL_BOUND,
        sixstate_bound: a.sixstate_bound,
        inputs: out.bases.iter().map(|b| b.input.as_str().to_string()).collect(),
        best_window_ps,
        windows,
        oscillation,
    }
}

fn scan_csv(scan: &WindowScanResult, out: &TeleportOutcome, meta: &qdtele_core::correlation::io::OutputMeta) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    meta.write_header(&mut w)?;
    let labels: Vec<&str> = out.bases.iter().map(|b| b.input.as_str()).collect();
    write!(w, "window_ps,effective_charlie_ps,effective_bob_ps,heralded,mean_fidelity,std_error,sigma_vs_classical,sigma_vs_sixstate")?;
    for l in &labels {
        write!(w, ",fidelity_{l}")?;
    }
    writeln!(w)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for k in 0..scan.window_sizes_ps.len() {
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            scan.window_sizes_ps[k],
            scan.effective_sizes_ps[k].0,
            scan.effective_sizes_ps[k].1,
            scan.heralded[k],
            opt(scan.mean_fidelity[k]),
            opt(scan.std_error[k]),
            opt(scan.significance_vs_classical[k]),
            opt(scan.significance_vs_sixstate[k])
        )?;
        for b in &out.bases {
            write!(w, ",{}", opt(b.scan.mean_fidelity[k]))?;
        }
        writeln!(w)?;
    }
    Ok(w)
}

pub fn cmd_teleport_report(cfg: &ExperimentConfig, input_dir: Option<&Path>, out_flag: Option<&Path>) -> Result<PathBuf> {
    let a = &cfg.analysis.teleport;
    let mut o = Outputs::create(cfg.output_dir(out_flag), "teleport-report", cfg)?;
    let streams: Vec<(PolarizationLabel, EventStream)> = match input_dir {
        Some(dir) => {
            let missing: Vec<&str> = a.inputs.iter().filter(|&&l| stream_files(dir, l).is_none()).map(|l| l.as_str()).collect();
            if !missing.is_empty() {
                return Err(Error::input(format!(
                    "{} of {} requested input states have no teleport_<state> stream in {}: {}",
                    missing.len(),
                    a.inputs.len(),
                    dir.display(),
                    missing.join(", ")
                )));
            }
            a.inputs
                .iter()
                .map(|&l| Ok((l, read_input(&mut o, &stream_files(dir, l).expect("checked above"))?)))
                .collect::<Result<_>>()?
        }
        None => simulate_inputs(cfg.require_sim()?, &a.inputs)?,
    };
    let refs: Vec<(PolarizationLabel, &EventStream)> = streams.iter().map(|(l, s)| (*l, s)).collect();
    let out = analyze(&refs, a)?;
    let meta = o.meta();
    for b in &out.bases {
        let mut buf = Vec::new();
        write_fidelity_csv(&b.map, &meta.clone().with("input_state", b.input.as_str()), &mut buf)?;
        o.write(&format!("fidelity_{}.csv", b.input.as_str()), &buf)?;
    }
    let mut buf = Vec::new();
    write_fidelity_csv(&out.pooled, &meta.clone().with("input_state", "pooled"), &mut buf)?;
    o.write("fidelity_pooled.csv", &buf)?;
    o.write("window_scan.csv", &scan_csv(&out.scan, &out, &meta)?)?;
    if !out.superposition_profile.is_empty() {
        let pts: Vec<(f64, f64)> = out
            .superposition_profile
            .iter()
            .filter(|r| r.1 + r.2 > 0)
            .map(|&(t, p, q)| (t, p as f64 / (p + q) as f64))
            .collect();
        let mut buf = Vec::new();
        let m = meta.clone().with("quantity", "superposition-state fidelity vs Bob delay").with("charlie_half_window_ps", a.profile_half_window_ps);
        write_curve_csv(&pts, Some(&m), &mut buf)?;
        o.write("bob_profile.csv", &buf)?;
    }
    if let Some(r) = &out.oscillation {
        o.write("bob_oscillation.fit.toml", r.to_toml()?.as_bytes())?;
    }
    let summary = summarize(cfg, &out);
    for w in &summary.windows {
        if let (Some(f), Some(s)) = (w.mean_fidelity, w.sigma_vs_classical) {
            println!("window {:>6} ps: F = {f:.3}, {s:+.1} sigma vs 2/3, {} heralds", w.window_ps, w.heralded);
        }
    }
    o.write("teleport_summary.toml", toml::to_string(&summary).expect("summary serializes").as_bytes())?;
    o.finish()
}
