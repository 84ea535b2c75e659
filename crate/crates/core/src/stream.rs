//! Detector click records and their on-disk formats.
//!
//! `TTAG1` is an 8-byte magic `TTAG1\0\0\0` followed by 9-byte little-endian
//! records `{channel: u8, time_ps: i64}`. The CSV form has the header
//! `channel,time_ps`.

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use crate::domain::Timestamp;
use crate::error::{Error, Result};

pub type Channel = u8;

pub const TTAG_MAGIC: [u8; 8] = *b"TTAG1\0\0\0";
pub const TTAG_RECORD_BYTES: usize = 9;
pub const CSV_HEADER: &str = "channel,time_ps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub channel: Channel,
    pub time_ps: Timestamp,
}

impl EventRecord {
    pub fn new(channel: Channel, time_ps: Timestamp) -> Self {
        EventRecord { channel, time_ps }
    }
}

impl Ord for EventRecord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_ps.cmp(&other.time_ps).then(self.channel.cmp(&other.channel))
    }
}

impl PartialOrd for EventRecord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered click records (ties broken by channel).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    records: Vec<EventRecord>,
    acquisition_ps: Timestamp,
}

impl EventStream {
    /// Sorts `records`; the acquisition time defaults to the record span.
    pub fn from_unsorted(mut records: Vec<EventRecord>) -> Self {
        records.sort_unstable();
        let acquisition_ps = span_of(&records);
        EventStream { records, acquisition_ps }
    }

    pub fn from_sorted(records: Vec<EventRecord>) -> Result<Self> {
        if !is_sorted(&records) {
            return Err(Error::input("event records are not sorted by (time, channel)"));
        }
        let acquisition_ps = span_of(&records);
        Ok(EventStream { records, acquisition_ps })
    }

    pub fn with_acquisition(mut self, acquisition_ps: Timestamp) -> Self {
        self.acquisition_ps = acquisition_ps.max(span_of(&self.records));
        self
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EventRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Measurement duration used for rate normalization.
    pub fn acquisition_ps(&self) -> Timestamp {
        self.acquisition_ps
    }

    /// Timestamps on one channel, in order.
    pub fn channel_times(&self, channel: Channel) -> Vec<Timestamp> {
        self.records.iter().filter(|r| r.channel == channel).map(|r| r.time_ps).collect()
    }

    pub fn count(&self, channel: Channel) -> u64 {
        self.records.iter().filter(|r| r.channel == channel).count() as u64
    }

    /// Channels present, ascending.
    pub fn channels(&self) -> Vec<Channel> {
        let mut seen = [false; 256];
        self.records.iter().for_each(|r| seen[r.channel as usize] = true);
        (0..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    /// Merges several sorted streams; acquisition is the longest input.
    pub fn merge(streams: Vec<EventStream>) -> EventStream {
        let acquisition = streams.iter().map(|s| s.acquisition_ps).max().unwrap_or(0);
        let mut records: Vec<EventRecord> = streams.into_iter().flat_map(|s| s.records).collect();
        records.sort_unstable();
        EventStream { acquisition_ps: acquisition.max(span_of(&records)), records }
    }
}

fn is_sorted(records: &[EventRecord]) -> bool {
    records.windows(2).all(|w| w[0] <= w[1])
}

fn span_of(records: &[EventRecord]) -> Timestamp {
    match (records.first(), records.last()) {
        (Some(a), Some(b)) => b.time_ps - a.time_ps,
        _ => 0,
    }
}

/// Writes a `TTAG1` file; returns the number of records written.
pub fn write_stream<W: Write>(stream: &EventStream, sink: W) -> Result<u64> {
    write_records(stream.records(), sink)
}

/// Writes raw records, rejecting unsorted input.
pub fn write_records<W: Write>(records: &[EventRecord], sink: W) -> Result<u64> {
    if !is_sorted(records) {
        return Err(Error::input("refusing to write an unsorted stream"));
    }
    let mut w = BufWriter::new(sink);
    w.write_all(&TTAG_MAGIC)?;
    let mut buf = [0u8; TTAG_RECORD_BYTES];
    for r in records {
        buf[0] = r.channel;
        buf[1..].copy_from_slice(&r.time_ps.to_le_bytes());
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(records.len() as u64)
}

/// Reads a `TTAG1` file. `name` identifies the source in error messages.
pub fn read_stream<R: Read>(source: R, name: &str) -> Result<EventStream> {
    let mut r = BufReader::new(source);
    let mut magic = [0u8; 8];
    if let Err(e) = r.read_exact(&mut magic) {
        return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(name, "file shorter than the TTAG1 header")
        } else {
            e.into()
        });
    }
    if magic != TTAG_MAGIC {
        return Err(Error::format(name, "bad magic bytes, expected TTAG1"));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % TTAG_RECORD_BYTES != 0 {
        return Err(Error::format(name, "truncated record at end of file"));
    }
    let records: Vec<EventRecord> = bytes
        .chunks_exact(TTAG_RECORD_BYTES)
        .map(|c| {
            let mut t = [0u8; 8];
            t.copy_from_slice(&c[1..]);
            EventRecord::new(c[0], i64::from_le_bytes(t))
        })
        .collect();
    EventStream::from_sorted(records).map_err(|_| Error::format(name, "records are not time ordered"))
}

pub fn write_stream_csv<W: Write>(stream: &EventStream, sink: W) -> Result<u64> {
    let mut w = BufWriter::new(sink);
    writeln!(w, "{CSV_HEADER}")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel, r.time_ps)?;
    }
    w.flush()?;
    Ok(stream.len() as u64)
}

/// Reads the CSV form; records are sorted on load.
pub fn read_stream_csv<R: Read>(source: R, name: &str) -> Result<EventStream> {
    let mut lines = BufReader::new(source).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::format(name, format!("expected header {CSV_HEADER:?}")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(name, format!("line {}: expected `channel,time_ps`", i + 2));
        let (c, t) = line.trim().split_once(',').ok_or_else(bad)?;
        let channel = c.trim().parse::<Channel>().map_err(|_| bad())?;
        let time = t.trim().parse::<Timestamp>().map_err(|_| bad())?;
        records.push(EventRecord::new(channel, time));
    }
    Ok(EventStream::from_unsorted(records))
}

/// Reads either format, chosen by the leading magic bytes.
pub fn read_stream_auto(bytes: &[u8], name: &str) -> Result<EventStream> {
    if bytes.starts_with(&TTAG_MAGIC) {
        read_stream(bytes, name)
    } else if bytes.starts_with(CSV_HEADER.as_bytes()) {
        read_stream_csv(bytes, name)
    } else if bytes.starts_with(b"TTAG") {
        Err(Error::format(name, "bad magic bytes, expected TTAG1"))
    } else {
        Err(Error::format(name, "neither a TTAG1 nor a channel,time_ps CSV file"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_stream_is_header_only() {
        let mut buf = Vec::new();
        assert_eq!(write_stream(&EventStream::default(), &mut buf).unwrap(), 0);
        assert_eq!(buf, TTAG_MAGIC);
        assert!(read_stream(&buf[..], "empty").unwrap().is_empty());
    }

    #[test]
    fn file_size_arithmetic() {
        let records: Vec<EventRecord> = (0..1_000_000).map(|i| EventRecord::new((i % 4) as u8, i)).collect();
        let stream = EventStream::from_sorted(records).unwrap();
        let mut buf = Vec::new();
        assert_eq!(write_stream(&stream, &mut buf).unwrap(), 1_000_000);
        assert_eq!(buf.len(), 8 + 9 * 1_000_000);
    }

    #[test]
    fn unsorted_rejected() {
        let records = vec![EventRecord::new(0, 10), EventRecord::new(0, 5)];
        assert!(write_records(&records, Vec::new()).is_err());
        assert!(EventStream::from_sorted(records).is_err());
    }

    #[test]
    fn ties_broken_by_channel() {
        let s = EventStream::from_unsorted(vec![EventRecord::new(3, 7), EventRecord::new(1, 7)]);
        assert_eq!(s.records()[0].channel, 1);
    }

    #[test]
    fn bad_magic_named() {
        let err = read_stream(&b"TTAG2\0\0\0"[..], "run.ttag").unwrap_err();
        assert!(err.to_string().contains("run.ttag"));
        assert!(read_stream_auto(b"TTAG9xxxx", "x.ttag").is_err());
        let truncated = [&TTAG_MAGIC[..], &[1, 2, 3]].concat();
        assert!(read_stream(&truncated[..], "t").is_err());
    }

    fn arb_records() -> impl Strategy<Value = Vec<EventRecord>> {
        prop::collection::vec((0u8..6, -1_000_000i64..1_000_000), 0..300)
            .prop_map(|v| v.into_iter().map(|(c, t)| EventRecord::new(c, t)).collect())
    }

    proptest! {
        #[test]
        fn ttag_round_trip(records in arb_records()) {
            let s = EventStream::from_unsorted(records);
            let mut buf = Vec::new();
            write_stream(&s, &mut buf).unwrap();
            let back = read_stream_auto(&buf, "mem").unwrap();
            prop_assert_eq!(back.records(), s.records());
        }

        #[test]
        fn csv_round_trip(records in arb_records()) {
            let s = EventStream::from_unsorted(records);
            let mut buf = Vec::new();
            write_stream_csv(&s, &mut buf).unwrap();
            let back = read_stream_auto(&buf, "mem").unwrap();
            prop_assert_eq!(back.records(), s.records());
        }
    }
}
