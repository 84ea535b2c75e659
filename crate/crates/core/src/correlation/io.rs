//! CSV forms of histograms, fidelity maps and sampled curves.
//!
//! Every file starts with `# meta: key=value` comment lines. Readers skip
//! comment lines and require the header row.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use super::{CorrelationHistogram, FidelityMap, G3Histogram};
use crate::error::{Error, Result};

pub const BIN_CONVENTION: &str = "left-closed right-open, zero delay at bin centre";

/// Metadata lines written at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputMeta {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl OutputMeta {
    pub fn new(config_hash: impl Into<String>, seed: Option<u64>) -> Self {
        OutputMeta { config_hash: config_hash.into(), seed, extra: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# meta: config_hash={}", self.config_hash)?;
        match self.seed {
            Some(s) => writeln!(w, "# meta: seed={s}")?,
            None => writeln!(w, "# meta: seed=none")?,
        }
        writeln!(w, "# meta: bin_convention={BIN_CONVENTION}")?;
        for (k, v) in &self.extra {
            writeln!(w, "# meta: {k}={v}")?;
        }
        Ok(())
    }
}

/// Parses the `# meta:` lines of a file into key/value pairs.
pub fn read_meta<R: Read>(source: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in BufReader::new(source).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix("# meta:") else {
            if line.starts_with('#') {
                continue;
            }
            break;
        };
        if let Some((k, v)) = rest.trim().split_once('=') {
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_g2_csv<W: Write>(h: &CorrelationHistogram, meta: &OutputMeta, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    let meta = meta
        .clone()
        .with("channels", format!("{},{}", h.channel_pair.0, h.channel_pair.1))
        .with("singles", format!("{},{}", h.singles.0, h.singles.1))
        .with("acquisition_ps", h.acquisition_ps)
        .with("bin_ps", h.bins.bin_ps)
        .with("span_ps", h.bins.span_ps)
        .with("normalization", h.normalization)
        .with("baseline", fmt_opt(h.baseline));
    meta.write_header(&mut w)?;
    writeln!(w, "tau_ps,counts,normalized")?;
    for (i, c) in h.counts.iter().enumerate() {
        let n = h.normalized.as_ref().map(|v| v[i]);
        writeln!(w, "{},{},{}", h.bins.center(i), c, fmt_opt(n))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_g3_csv<W: Write>(h: &G3Histogram, meta: &OutputMeta, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    let meta = meta
        .clone()
        .with("trigger_channel", h.trigger_channel)
        .with("channels", format!("{},{}", h.channels.0, h.channels.1))
        .with("triggers", h.triggers)
        .with("acquisition_ps", h.acquisition_ps);
    meta.write_header(&mut w)?;
    writeln!(w, "tau_charlie_ps,tau_bob_ps,counts")?;
    let (ni, nj) = h.shape();
    for i in 0..ni {
        for j in 0..nj {
            writeln!(w, "{},{},{}", h.axis_charlie.center(i), h.axis_bob.center(j), h.get(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `counts` is `counts_p + counts_q`; undefined cells have empty
/// fidelity and error fields.
pub fn write_fidelity_csv<W: Write>(m: &FidelityMap, meta: &OutputMeta, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    meta.write_header(&mut w)?;
    writeln!(w, "tau_charlie_ps,tau_bob_ps,counts,fidelity,std_error,counts_p,counts_q")?;
    let (ni, nj) = m.shape();
    for i in 0..ni {
        for j in 0..nj {
            let k = i * nj + j;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                m.axis_charlie.center(i),
                m.axis_bob.center(j),
                m.counts_p[k] + m.counts_q[k],
                fmt_opt(m.fidelity[k]),
                fmt_opt(m.std_error[k]),
                m.counts_p[k],
                m.counts_q[k]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(points: &[(f64, f64)], meta: Option<&OutputMeta>, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    if let Some(m) = meta {
        m.write_header(&mut w)?;
    }
    writeln!(w, "tau_ps,value")?;
    for (t, v) in points {
        writeln!(w, "{t},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Data rows of a CSV with the given header, comments skipped.
fn data_rows<R: Read>(source: R, name: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line.replace(' ', "") != header {
                return Err(Error::format(name, format!("expected header {header:?}, found {line:?}")));
            }
            seen_header = true;
            continue;
        }
        rows.push((i + 1, line.split(',').map(|s| s.trim().to_string()).collect()));
    }
    if !seen_header {
        return Err(Error::format(name, format!("missing header {header:?}")));
    }
    Ok(rows)
}

fn parse_f64(name: &str, line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::format(name, format!("line {line}: {s:?} is not a number")))
}

/// Reads a `tau_ps,value` curve.
pub fn read_curve_csv<R: Read>(source: R, name: &str) -> Result<Vec<(f64, f64)>> {
    data_rows(source, name, "tau_ps,value")?
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 2 {
                return Err(Error::format(name, format!("line {line}: expected 2 fields")));
            }
            Ok((parse_f64(name, line, &f[0])?, parse_f64(name, line, &f[1])?))
        })
        .collect()
}

/// One row of a `tau_ps,counts,normalized` histogram file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Row {
    pub tau_ps: f64,
    pub counts: u64,
    pub normalized: Option<f64>,
}

pub fn read_g2_csv<R: Read>(source: R, name: &str) -> Result<Vec<G2Row>> {
    data_rows(source, name, "tau_ps,counts,normalized")?
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 3 {
                return Err(Error::format(name, format!("line {line}: expected 3 fields")));
            }
            let counts = f[1]
                .parse::<u64>()
                .map_err(|_| Error::format(name, format!("line {line}: counts must be a non-negative integer")))?;
            let normalized = if f[2].is_empty() { None } else { Some(parse_f64(name, line, &f[2])?) };
            Ok(G2Row { tau_ps: parse_f64(name, line, &f[0])?, counts, normalized })
        })
        .collect()
}

/// Rebuilds a histogram from a g2 file: the axis from the delay column,
/// channels and baseline from the meta lines when present. `normalized` is
/// kept only when every row has it and a baseline is recorded.
pub fn read_g2_histogram(bytes: &[u8], name: &str) -> Result<CorrelationHistogram> {
    let rows = read_g2_csv(bytes, name)?;
    if rows.len() < 2 || rows.len() % 2 == 0 {
        return Err(Error::format(name, format!("{} rows cannot form a centred histogram", rows.len())));
    }
    let bin = rows[1].tau_ps - rows[0].tau_ps;
    let half = (rows.len() / 2) as f64;
    let regular = rows.iter().enumerate().all(|(i, r)| (r.tau_ps - (i as f64 - half) * bin).abs() < 1e-6);
    if !(bin > 0.0) || bin.fract() != 0.0 || !regular {
        return Err(Error::format(name, "delays must be evenly spaced whole picoseconds centred on zero"));
    }
    let bins = super::BinSpec::new((half * bin) as i64, bin as i64)?;
    let meta: std::collections::HashMap<String, String> = read_meta(bytes)?.into_iter().collect();
    fn pair<T: std::str::FromStr>(v: Option<&String>) -> Option<(T, T)> {
        let (a, b) = v?.split_once(',')?;
        Some((a.parse().ok()?, b.parse().ok()?))
    }
    let baseline = meta.get("baseline").and_then(|v| v.parse::<f64>().ok());
    let normalized: Option<Vec<f64>> = rows.iter().map(|r| r.normalized).collect();
    Ok(CorrelationHistogram {
        bins,
        counts: rows.iter().map(|r| r.counts).collect(),
        channel_pair: pair(meta.get("channels")).unwrap_or((0, 1)),
        singles: pair(meta.get("singles")).unwrap_or((0, 0)),
        acquisition_ps: meta.get("acquisition_ps").and_then(|v| v.parse().ok()).unwrap_or(0),
        normalization: super::Normalization::default(),
        normalized: normalized.filter(|_| baseline.is_some()),
        baseline: baseline.filter(|_| rows.iter().all(|r| r.normalized.is_some())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{build_fidelity_map, correlate_g2, BinSpec};
    use crate::stream::{EventRecord, EventStream};

    #[test]
    fn g2_round_trip_with_meta() {
        let recs = (0..2000).map(|i| EventRecord::new((i % 2) as u8, i * 37 % 50_000)).collect();
        let s = EventStream::from_unsorted(recs);
        let h = correlate_g2(&s, 0, 1, BinSpec::new(500, 50).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_g2_csv(&h, &OutputMeta::new("abc123", Some(42)), &mut buf).unwrap();
        let meta = read_meta(&buf[..]).unwrap();
        assert!(meta.contains(&("config_hash".into(), "abc123".into())));
        assert!(meta.contains(&("seed".into(), "42".into())));
        assert!(meta.iter().any(|(k, _)| k == "bin_convention"));
        let rows = read_g2_csv(&buf[..], "h.csv").unwrap();
        assert_eq!(rows.len(), h.counts.len());
        assert_eq!(rows.iter().map(|r| r.counts).collect::<Vec<_>>(), h.counts);
        assert_eq!(rows[10].tau_ps, 0.0);
        let back = read_g2_histogram(&buf, "h.csv").unwrap();
        assert_eq!((back.bins, &back.counts, back.channel_pair), (h.bins, &h.counts, h.channel_pair));
        assert!((back.baseline.unwrap() / h.baseline.unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fidelity_csv_blank_for_undefined() {
        let b = BinSpec::new(8, 8).unwrap();
        let mut p = G3Histogram::empty(b, b, 0, 1, 2);
        p.counts[4] = 3;
        let m = build_fidelity_map(&p, &G3Histogram::empty(b, b, 0, 1, 3)).unwrap();
        let mut buf = Vec::new();
        write_fidelity_csv(&m, &OutputMeta::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0,0,3,1.000000,0.000000,3,0"));
        assert!(text.contains("-8,-8,0,,,0,0"));
        assert!(!text.contains("NaN"));
    }

    #[test]
    fn curve_reader_errors() {
        let ok = "# meta: x=1\ntau_ps,value\n0,1\n5,0.5\n";
        assert_eq!(read_curve_csv(ok.as_bytes(), "c").unwrap(), vec![(0.0, 1.0), (5.0, 0.5)]);
        assert!(matches!(read_curve_csv("t,v\n0,1\n".as_bytes(), "c"), Err(Error::Format { .. })));
        assert!(read_curve_csv("tau_ps,value\n0,x\n".as_bytes(), "c").is_err());
    }
}
