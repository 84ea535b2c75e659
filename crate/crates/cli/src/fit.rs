use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use qdtele_core::correlation::io::{read_curve_csv, read_g2_histogram, write_curve_csv};
use qdtele_core::correlation::CorrelationHistogram;
use qdtele_core::estimation::{
    fit_damped_oscillation, fit_fringe_envelope, fit_g2_hbt, fit_lifetime, fit_tpi, Fit, G2Levels, TpiFitSpec,
    FRINGE_MODEL, LIFETIME_MODEL, MODEL_IDS, OSCILLATION_MODEL, TPI_MODEL,
};
use qdtele_core::models::{G2QdModel, TpiParams};
use qdtele_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::output::Outputs;

/// `(delay, visibility, σ)` from a Michelson table, or from a plain curve
/// with unit errors. Blank (flagged) visibilities are skipped.
fn read_fringe_table(bytes: &[u8], name: &str) -> Result<Vec<(f64, f64, f64)>> {
    let header = BufReader::new(bytes)
        .lines()
        .map_while(|l| l.ok())
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or_default();
    if header.replace(' ', "") == "tau_ps,value" {
        return Ok(read_curve_csv(bytes, name)?.into_iter().map(|(t, v)| (t, v, 1.0)).collect());
    }
    if header.replace(' ', "") != "delay_ps,visibility,std_error,counts" {
        return Err(Error::format(name, format!("unrecognized header {header:?}")));
    }
    let num = |s: &str, line: usize| {
        s.trim().parse::<f64>().map_err(|_| Error::format(name, format!("line {line}: {s:?} is not a number")))
    };
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::format(name, format!("line {}: expected 4 fields", i + 1)));
        }
        if f[1].trim().is_empty() || f[2].trim().is_empty() {
            continue;
        }
        out.push((num(f[0], i + 1)?, num(f[1], i + 1)?, num(f[2], i + 1)?.max(1e-6)));
    }
    Ok(out)
}

fn histogram(o: &mut Outputs, cfg: &ExperimentConfig, path: &Path) -> Result<CorrelationHistogram> {
    let bytes = std::fs::read(path)?;
    o.note_input(path, &bytes);
    let mut h = read_g2_histogram(&bytes, &path.display().to_string())?;
    if h.baseline.is_none() {
        h.normalize(cfg.analysis.normalization)?;
    }
    Ok(h)
}

fn tpi_spec(cfg: &ExperimentConfig) -> Result<TpiFitSpec> {
    let sim = cfg
        .sim
        .as_ref()
        .ok_or_else(|| Error::config("the tpi model takes intensities and background from the [sim] table; pass --config"))?;
    let alpha2 = sim.laser.intensity_alpha2;
    if !(alpha2 > 0.0) {
        return Err(Error::config("the tpi model needs a positive laser intensity_alpha2"));
    }
    let fixed = TpiParams::from_g2_zero(
        1.0 / alpha2,
        sim.qd.g2_zero(),
        sim.qd.t2_ps,
        sim.laser.detuning_uev,
        G2QdModel::from(&sim.qd),
    )?;
    Ok(TpiFitSpec { fixed, fit_detuning: cfg.analysis.fit_detuning, response_fwhm_ps: cfg.response_fwhm_ps() })
}

pub fn cmd_fit(cfg: &ExperimentConfig, model: &str, inputs: &[PathBuf], out: Option<&Path>) -> Result<PathBuf> {
    if !MODEL_IDS.contains(&model) {
        return Err(Error::config(format!("unknown model {model:?}; available models: {}", MODEL_IDS.join(", "))));
    }
    let want = if model == TPI_MODEL { 2 } else { 1 };
    if inputs.len() != want {
        return Err(Error::config(format!("model {model} takes {want} input file(s), got {}", inputs.len())));
    }
    let mut o = Outputs::create(cfg.output_dir(out), "fit", cfg)?;
    let fwhm = cfg.response_fwhm_ps();
    let read = |o: &mut Outputs, p: &Path| -> Result<Vec<u8>> {
        let b = std::fs::read(p)?;
        o.note_input(p, &b);
        Ok(b)
    };
    let name0 = inputs[0].display().to_string();
    let fit: Fit = match model {
        FRINGE_MODEL => fit_fringe_envelope(&read_fringe_table(&read(&mut o, &inputs[0])?, &name0)?)?,
        OSCILLATION_MODEL => {
            let pts = read_curve_csv(&read(&mut o, &inputs[0])?[..], &name0)?;
            fit_damped_oscillation(&pts.into_iter().map(|(t, v)| (t, v, 1.0)).collect::<Vec<_>>())?
        }
        LIFETIME_MODEL => fit_lifetime(&read_curve_csv(&read(&mut o, &inputs[0])?[..], &name0)?)?,
        TPI_MODEL => {
            let spec = tpi_spec(cfg)?;
            let co = histogram(&mut o, cfg, &inputs[0])?;
            let cross = histogram(&mut o, cfg, &inputs[1])?;
            fit_tpi(&co, &cross, &spec)?
        }
        _ => {
            let levels = if model == G2Levels::Three.model_id() { G2Levels::Three } else { G2Levels::Four };
            fit_g2_hbt(&histogram(&mut o, cfg, &inputs[0])?, levels, fwhm)?
        }
    };
    let mut report = fit.report;
    for p in inputs {
        report = report.with_input(p.display().to_string(), o.input_hash(p).unwrap_or_default());
    }
    if !report.converged {
        eprintln!("warning: fit did not converge ({:?}); results are flagged in the report", report.termination);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let stem = inputs[0].file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "fit".into());
    o.write(&format!("{stem}.{model}.fit.toml"), report.to_toml()?.as_bytes())?;
    let meta = o.meta().with("model", model);
    for c in &fit.curves {
        let mut buf = Vec::new();
        write_curve_csv(&c.points, Some(&meta.clone().with("curve", &c.label)), &mut buf)?;
        o.write(&format!("{stem}.{model}.{}.curve.csv", c.label), &buf)?;
    }
    o.finish()
}
