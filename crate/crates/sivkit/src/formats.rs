//! On-disk formats: timestamp streams (text and packed binary), spectra and
//! numeric tables, correlation histograms and scan images.
//!
//! Text formats carry their metadata in `#` comment lines so a plain CSV
//! reader still sees a rectangular table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sivkit_core::correlator::CorrelationHistogram;
use sivkit_core::fit::Spectrum;
use sivkit_core::photostream::{ScanImage, TimestampStream};

use crate::error::{AppError, AppResult};

/// First eight bytes of a binary timestamp file.
pub const TIMESTAMP_MAGIC: &[u8; 8] = b"SIVKTS01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Any ordering problem is an error.
    #[default]
    Strict,
    /// Ordering problems are repaired and reported as warnings.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampFormat {
    #[default]
    Text,
    Binary,
}

/// A parsed object plus the repairs made under lenient ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn read_bytes(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

/// Reads a timestamp file, detecting the binary format by its magic bytes.
pub fn read_timestamps(path: &Path, mode: IngestMode) -> AppResult<Ingested<TimestampStream>> {
    let bytes = read_bytes(path)?;
    parse_timestamps(&bytes, mode).map_err(|e| e.context(path.display()))
}

pub fn parse_timestamps(bytes: &[u8], mode: IngestMode) -> AppResult<Ingested<TimestampStream>> {
    if bytes.starts_with(TIMESTAMP_MAGIC) {
        return decode_binary_timestamps(bytes, mode);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| AppError::data("not a text timestamp file and no binary header"))?;
    parse_text_timestamps(text, mode)
}

/// One integer (ps) per line, optionally preceded by
/// `# channel <id> duration_ps <n>`. Without a duration the stream ends one
/// picosecond after its last event.
pub fn parse_text_timestamps(text: &str, mode: IngestMode) -> AppResult<Ingested<TimestampStream>> {
    let mut channel = 0u8;
    let mut duration: Option<u64> = None;
    let mut entries: Vec<(usize, u64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            for pair in words.chunks(2) {
                match pair {
                    ["channel", v] => channel = parse_field(v, "channel", lineno)?,
                    ["duration_ps", v] => duration = Some(parse_field(v, "duration_ps", lineno)?),
                    _ => {}
                }
            }
            continue;
        }
        let t: u64 = line
            .parse()
            .map_err(|_| AppError::data(format!("line {lineno}: `{line}` is not a non-negative integer timestamp")))?;
        entries.push((lineno, t));
    }
    let mut warnings = Vec::new();
    let times = check_order(entries, mode, "line", &mut warnings)?;
    let duration = match duration {
        Some(d) => d,
        None => times.last().map_or(1, |&t| t + 1),
    };
    if let Some(&last) = times.last() {
        if last > duration {
            return Err(AppError::data(format!("duration_ps: {duration} is before the last timestamp {last}")));
        }
    }
    Ok(Ingested { value: TimestampStream::new(channel, times, duration)?, warnings })
}

fn parse_field<T: std::str::FromStr>(v: &str, name: &str, lineno: usize) -> AppResult<T> {
    v.parse().map_err(|_| AppError::data(format!("line {lineno}: invalid {name} `{v}`")))
}

// Entries carry their line (text) or record (binary) number for messages.
fn check_order(
    entries: Vec<(usize, u64)>,
    mode: IngestMode,
    unit: &str,
    warnings: &mut Vec<String>,
) -> AppResult<Vec<u64>> {
    let bad = entries.windows(2).find(|w| w[1].1 <= w[0].1);
    match (bad, mode) {
        (None, _) => Ok(entries.into_iter().map(|(_, t)| t).collect()),
        (Some(w), IngestMode::Strict) => {
            let (n, t) = w[1];
            let what = if t == w[0].1 { "duplicates" } else { "is before" };
            Err(AppError::data(format!("{unit} {n}: timestamp {t} {what} the previous timestamp {}", w[0].1)))
        }
        (Some(w), IngestMode::Lenient) => {
            warnings.push(format!("{unit} {}: timestamps out of order; sorted and de-duplicated", w[1].0));
            let mut times: Vec<u64> = entries.into_iter().map(|(_, t)| t).collect();
            times.sort_unstable();
            times.dedup();
            Ok(times)
        }
    }
}

pub fn encode_text_timestamps(stream: &TimestampStream) -> String {
    let mut out = String::with_capacity(12 * stream.len() + 48);
    let _ = writeln!(out, "# channel {} duration_ps {}", stream.channel(), stream.duration_ps());
    for t in stream.times_ps() {
        let _ = writeln!(out, "{t}");
    }
    out
}

/// Magic, then little-endian u64 duration, u64 channel, and one u64 per event.
pub fn encode_binary_timestamps(stream: &TimestampStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * stream.len());
    out.extend_from_slice(TIMESTAMP_MAGIC);
    out.extend_from_slice(&stream.duration_ps().to_le_bytes());
    out.extend_from_slice(&(stream.channel() as u64).to_le_bytes());
    for t in stream.times_ps() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

fn decode_binary_timestamps(bytes: &[u8], mode: IngestMode) -> AppResult<Ingested<TimestampStream>> {
    let body = &bytes[TIMESTAMP_MAGIC.len()..];
    if body.len() < 16 || !body.len().is_multiple_of(8) {
        return Err(AppError::data("binary timestamp file is truncated"));
    }
    let word = |i: usize| u64::from_le_bytes(body[8 * i..8 * i + 8].try_into().expect("8-byte chunk"));
    let duration = word(0);
    let channel = u8::try_from(word(1)).map_err(|_| AppError::data("channel: does not fit in 8 bits"))?;
    let entries: Vec<(usize, u64)> = (2..body.len() / 8).map(|i| (i - 1, word(i))).collect();
    let mut warnings = Vec::new();
    let times = check_order(entries, mode, "record", &mut warnings)?;
    Ok(Ingested { value: TimestampStream::new(channel, times, duration)?, warnings })
}

pub fn write_timestamps(path: &Path, stream: &TimestampStream, format: TimestampFormat) -> AppResult<()> {
    match format {
        TimestampFormat::Text => write_file(path, encode_text_timestamps(stream)),
        TimestampFormat::Binary => write_file(path, encode_binary_timestamps(stream)),
    }
}

/// Comma- or whitespace-separated numeric rows. A first line that does not
/// parse as numbers is taken as a header; `#` lines are comments.
pub fn parse_table(text: &str, min_columns: usize) -> AppResult<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let Ok(values) = parsed else {
            if !seen_data && rows.is_empty() {
                seen_data = true; // header
                continue;
            }
            return Err(AppError::data(format!("line {lineno}: non-numeric field in `{line}`")));
        };
        seen_data = true;
        if values.len() < min_columns {
            return Err(AppError::data(format!("line {lineno}: expected {min_columns} columns, found {}", values.len())));
        }
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(AppError::data(format!("line {lineno}: column {} is not finite", c + 1)));
        }
        rows.push(values);
    }
    Ok(rows)
}

pub fn read_table(path: &Path, min_columns: usize) -> AppResult<Vec<Vec<f64>>> {
    parse_table(&read_text(path)?, min_columns).map_err(|e| e.context(path.display()))
}

/// A header row followed by rows formatted with `{}` (shortest round-trip).
pub fn encode_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// `wavelength_nm,intensity` rows, optional `# resolution_nm <x>` line.
pub fn parse_spectrum(text: &str, default_resolution_nm: f64, mode: IngestMode) -> AppResult<Ingested<Spectrum>> {
    let mut resolution = default_resolution_nm;
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if let ["resolution_nm", v] = words.as_slice() {
                resolution = v.parse().map_err(|_| AppError::data(format!("resolution_nm: invalid value `{v}`")))?;
            }
        }
    }
    let rows = parse_table(text, 2)?;
    let mut wl: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let mut warnings = Vec::new();
    let descending = wl.len() > 1 && wl.windows(2).all(|w| w[1] < w[0]);
    if descending {
        match mode {
            IngestMode::Strict => {
                return Err(AppError::data("wavelength_nm: descending order (use lenient ingestion to reverse)"));
            }
            IngestMode::Lenient => {
                wl.reverse();
                y.reverse();
                warnings.push("wavelength_nm: descending order reversed".to_string());
            }
        }
    }
    Ok(Ingested { value: Spectrum::new(wl, y, resolution)?, warnings })
}

pub fn read_spectrum(path: &Path, default_resolution_nm: f64, mode: IngestMode) -> AppResult<Ingested<Spectrum>> {
    parse_spectrum(&read_text(path)?, default_resolution_nm, mode).map_err(|e| e.context(path.display()))
}

pub fn encode_spectrum(s: &Spectrum) -> String {
    let rows: Vec<Vec<f64>> = s.wavelengths_nm().iter().zip(s.intensities()).map(|(&w, &i)| vec![w, i]).collect();
    format!("# resolution_nm {}\n{}", s.resolution_nm(), encode_table(&["wavelength_nm", "intensity"], &rows))
}

/// Histogram with its metadata line and a `g2` column (empty when the
/// histogram cannot be normalized).
pub fn encode_histogram(h: &CorrelationHistogram, g2: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# bin_width_ps {} max_lag_ps {} events_a {} events_b {} duration_ps {}",
        h.bin_width_ps, h.max_lag_ps, h.events_a, h.events_b, h.duration_ps
    );
    out.push_str("lag_ps,counts,g2\n");
    for (i, c) in h.counts.iter().enumerate() {
        match g2 {
            Some(g) => {
                let _ = writeln!(out, "{},{c},{}", h.lag_ps(i), g[i]);
            }
            None => {
                let _ = writeln!(out, "{},{c},", h.lag_ps(i));
            }
        }
    }
    out
}

pub fn parse_histogram(text: &str) -> AppResult<CorrelationHistogram> {
    let mut meta = [None; 5];
    let keys = ["bin_width_ps", "max_lag_ps", "events_a", "events_b", "duration_ps"];
    let mut counts = Vec::new();
    let mut lags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            for pair in words.chunks(2) {
                if let [k, v] = pair {
                    if let Some(j) = keys.iter().position(|key| key == k) {
                        meta[j] = Some(parse_field::<u64>(v, k, lineno)?);
                    }
                }
            }
            continue;
        }
        if line.is_empty() || line.starts_with("lag_ps") {
            continue;
        }
        let mut fields = line.split(',');
        let lag: i64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| AppError::data(format!("line {lineno}: invalid lag_ps")))?;
        let c: u64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| AppError::data(format!("line {lineno}: invalid counts")))?;
        lags.push(lag);
        counts.push(c);
    }
    let get = |j: usize| meta[j].ok_or_else(|| AppError::data(format!("{}: missing from the histogram header", keys[j])));
    let h = CorrelationHistogram {
        bin_width_ps: get(0)?,
        max_lag_ps: get(1)?,
        total: counts.iter().sum(),
        counts,
        events_a: get(2)?,
        events_b: get(3)?,
        duration_ps: get(4)?,
    };
    if h.bin_width_ps == 0 || !h.max_lag_ps.is_multiple_of(h.bin_width_ps) {
        return Err(AppError::data("bin_width_ps: inconsistent with max_lag_ps"));
    }
    if h.counts.len() as u64 != 2 * (h.max_lag_ps / h.bin_width_ps) + 1 {
        return Err(AppError::data("counts: row count does not match the header"));
    }
    if let Some(i) = (0..h.counts.len()).find(|&i| lags[i] != h.lag_ps(i)) {
        return Err(AppError::data(format!("lag_ps: row {} has lag {} (expected {})", i + 1, lags[i], h.lag_ps(i))));
    }
    Ok(h)
}

pub fn read_histogram(path: &Path) -> AppResult<CorrelationHistogram> {
    parse_histogram(&read_text(path)?).map_err(|e| e.context(path.display()))
}

pub fn encode_image(img: &ScanImage) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# extent_um {} {} step_um {} dwell_s {}",
        img.extent_um.0, img.extent_um.1, img.step_um, img.dwell_s
    );
    for row in img.counts.chunks(img.nx) {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_image(text: &str) -> AppResult<ScanImage> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| AppError::data("image: empty file"))?;
    let words: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    let (w, h, step, dwell) = match words.as_slice() {
        ["extent_um", w, h, "step_um", s, "dwell_s", d] => (
            parse_field::<f64>(w, "extent_um", 1)?,
            parse_field::<f64>(h, "extent_um", 1)?,
            parse_field::<f64>(s, "step_um", 1)?,
            parse_field::<f64>(d, "dwell_s", 1)?,
        ),
        _ => return Err(AppError::data("line 1: expected `# extent_um <w> <h> step_um <s> dwell_s <d>`")),
    };
    let mut counts = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (i, line) in lines.enumerate() {
        let row: Result<Vec<u64>, _> = line.split(',').map(|f| f.trim().parse::<u64>()).collect();
        let row = row.map_err(|_| AppError::data(format!("image row {}: invalid count", i + 1)))?;
        if *nx.get_or_insert(row.len()) != row.len() {
            return Err(AppError::data(format!("image row {}: ragged row", i + 1)));
        }
        counts.extend(row);
        ny += 1;
    }
    Ok(ScanImage { nx: nx.unwrap_or(0), ny, extent_um: (w, h), step_um: step, dwell_s: dwell, counts })
}

pub fn read_image(path: &Path) -> AppResult<ScanImage> {
    parse_image(&read_text(path)?).map_err(|e| e.context(path.display()))
}
