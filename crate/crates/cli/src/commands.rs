use std::io::Write;
use std::path::{Path, PathBuf};

use qdtele_core::correlation::io::{write_fidelity_csv, write_g2_csv, write_g3_csv, OutputMeta};
use qdtele_core::correlation::{build_fidelity_map, correlate_g2, correlate_g3_axes, BinSpec};
use qdtele_core::experiment::simulate_inputs;
use qdtele_core::stream::{read_stream_auto, write_stream, write_stream_csv, Channel, EventStream};
use qdtele_core::synth::{run_hom, run_michelson, simulate, MichelsonRow, Topology, CH_H, CH_P, CH_Q, CH_V};
use qdtele_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EventFormat {
    Ttag,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CorrelateMode {
    G2,
    G3,
    Fidelity,
}

fn stream_bytes(s: &EventStream, format: EventFormat) -> Result<(Vec<u8>, &'static str)> {
    let mut buf = Vec::new();
    match format {
        EventFormat::Ttag => {
            write_stream(s, &mut buf)?;
            Ok((buf, "ttag"))
        }
        EventFormat::Csv => {
            write_stream_csv(s, &mut buf)?;
            Ok((buf, "csv"))
        }
    }
}

pub fn write_michelson_csv(rows: &[MichelsonRow], meta: &OutputMeta) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    meta.write_header(&mut w)?;
    writeln!(w, "delay_ps,visibility,std_error,counts")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        writeln!(w, "{},{},{},{}", r.delay_ps, opt(r.visibility), opt(r.std_error), r.counts)?;
    }
    Ok(w)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: Option<&Path>, format: EventFormat) -> Result<PathBuf> {
    let sim = cfg.require_sim()?;
    let mut o = Outputs::create(cfg.output_dir(out), "simulate", cfg)?;
    o.write("config.resolved.toml", cfg.to_toml().as_bytes())?;
    match sim.topology {
        Topology::Michelson => {
            let rows = run_michelson(sim)?;
            let flagged = rows.iter().filter(|r| r.visibility.is_none()).count();
            if flagged > 0 {
                eprintln!("warning: {flagged} delays below {} counts are left blank", sim.michelson.min_counts);
            }
            o.write("michelson.csv", &write_michelson_csv(&rows, &o.meta().with("topology", "michelson"))?)?;
        }
        Topology::Hom => {
            for (copol, name) in [(true, "hom_co"), (false, "hom_cross")] {
                let (bytes, ext) = stream_bytes(&run_hom(sim, copol)?, format)?;
                o.write(&format!("{name}.{ext}"), &bytes)?;
            }
        }
        Topology::Hbt => {
            let (bytes, ext) = stream_bytes(&simulate(sim)?, format)?;
            o.write(&format!("hbt.{ext}"), &bytes)?;
        }
        Topology::Teleport => {
            for (label, s) in simulate_inputs(sim, &cfg.analysis.teleport.inputs)? {
                let (bytes, ext) = stream_bytes(&s, format)?;
                o.write(&format!("teleport_{}.{ext}", label.as_str()), &bytes)?;
            }
        }
    }
    o.finish()
}

pub fn read_input(o: &mut Outputs, path: &Path) -> Result<EventStream> {
    let bytes = std::fs::read(path)?;
    o.note_input(path, &bytes);
    read_stream_auto(&bytes, &path.display().to_string())
}

fn warn_empty(stream: &EventStream, channels: &[Channel], path: &Path) {
    for &c in channels {
        if stream.count(c) == 0 {
            eprintln!("warning: channel {c} has no events in {}", path.display());
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

pub fn cmd_correlate(
    cfg: &ExperimentConfig,
    inputs: &[PathBuf],
    mode: CorrelateMode,
    channels: Option<&[Channel]>,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let a = &cfg.analysis;
    let default: &[Channel] = match mode {
        CorrelateMode::G2 => &[0, 1],
        CorrelateMode::G3 => &[CH_H, CH_V, CH_P],
        CorrelateMode::Fidelity => &[CH_H, CH_V, CH_P, CH_Q],
    };
    let ch = channels.unwrap_or(default);
    let need = default.len();
    if ch.len() != need {
        return Err(Error::config(format!("{mode:?} needs {need} channels, got {}", ch.len())));
    }
    let mut o = Outputs::create(cfg.output_dir(out), "correlate", cfg)?;
    for path in inputs {
        let s = read_input(&mut o, path)?;
        warn_empty(&s, ch, path);
        let meta = o.meta().with("input", path.display()).with("input_sha256", o.input_hash(path).unwrap_or_default());
        let mut buf = Vec::new();
        let name = match mode {
            CorrelateMode::G2 => {
                let mut h = correlate_g2(&s, ch[0], ch[1], BinSpec::new(a.g2_span_ps, a.g2_bin_ps)?)?;
                if h.normalize(a.normalization).is_err() {
                    eprintln!("warning: {} has no uncorrelated level; normalized column left blank", path.display());
                }
                write_g2_csv(&h, &meta, &mut buf)?;
                format!("{}.g2.csv", stem(path))
            }
            CorrelateMode::G3 => {
                let (ac, ab) = a.teleport.axes()?;
                write_g3_csv(&correlate_g3_axes(&s, ch[0], ch[1], ch[2], ac, ab)?, &meta, &mut buf)?;
                format!("{}.g3.csv", stem(path))
            }
            CorrelateMode::Fidelity => {
                let (ac, ab) = a.teleport.axes()?;
                let p = correlate_g3_axes(&s, ch[0], ch[1], ch[2], ac, ab)?;
                let q = correlate_g3_axes(&s, ch[0], ch[1], ch[3], ac, ab)?;
                write_fidelity_csv(&build_fidelity_map(&p, &q)?, &meta, &mut buf)?;
                format!("{}.fidelity.csv", stem(path))
            }
        };
        o.write(&name, &buf)?;
    }
    o.finish()
}
