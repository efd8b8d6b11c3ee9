//! File formats: layout and measurement CSV, the `NFBP` measurement binary,
//! the `NFIM` volume dump, and image exports (CSV grid, grayscale PNG with a
//! sidecar extent file).
//!
//! All binary numbers are little-endian. Text numbers carry 17 significant
//! digits so every `f64` survives a round trip.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::forward::{MeasurementSet, Pairing};
use crate::geometry::{ArrayLayout, Position3};
use crate::metrics::{to_display_db, Image2D, DISPLAY_RANGE_DB};
use crate::reconstruct::{ImageGrid, ImageVolume};
use crate::{Error, Result, C64};

pub const LAYOUT_HEADER: &str = "role,x,y,z,weight";
pub const MEASUREMENT_HEADER: &str = "f_hz,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,re,im";
pub const MEASUREMENT_MAGIC: &[u8; 4] = b"NFBP";
pub const MEASUREMENT_VERSION: u16 = 1;
pub const VOLUME_MAGIC: &[u8; 4] = b"NFIM";

/// Formats with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(Error::Parse {
            line: lineno,
            column: 1,
            message: format!("expected {expected} fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_f64(field: &str, lineno: usize, column: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|e| Error::Parse {
        line: lineno,
        column,
        message: format!("'{field}': {e}"),
    })
}

/// Iterates non-blank lines after a mandatory header, with 1-based line numbers.
fn data_lines<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    match lines.next() {
        Some(Ok((_, h))) if h.trim() == header => {}
        Some(Ok((n, h))) => {
            return Err(Error::Parse {
                line: n,
                column: 1,
                message: format!("expected header '{header}', found '{}'", h.trim()),
            })
        }
        Some(Err(e)) => return Err(e.into()),
        None => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for l in lines {
        let (n, l) = l?;
        if !l.trim().is_empty() {
            out.push((n, l));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- layouts

pub fn write_layout_csv<W: Write>(mut w: W, layout: &ArrayLayout) -> Result<()> {
    writeln!(w, "{LAYOUT_HEADER}")?;
    let rows = [
        ("tx", &layout.tx_positions, &layout.tx_weights),
        ("rx", &layout.rx_positions, &layout.rx_weights),
    ];
    for (role, positions, weights) in rows {
        for (p, wt) in positions.iter().zip(weights.iter()) {
            writeln!(w, "{role},{},{},{},{}", num(p.x), num(p.y), num(p.z), num(*wt))?;
        }
    }
    Ok(())
}

pub fn read_layout_csv<R: BufRead>(r: R) -> Result<ArrayLayout> {
    let mut layout = ArrayLayout::empty();
    for (n, line) in data_lines(r, LAYOUT_HEADER)? {
        let f = parse_fields(&line, n, 5)?;
        let p = Position3::new(parse_f64(f[1], n, 2)?, parse_f64(f[2], n, 3)?, parse_f64(f[3], n, 4)?);
        let w = parse_f64(f[4], n, 5)?;
        match f[0] {
            "tx" => {
                layout.tx_positions.push(p);
                layout.tx_weights.push(w);
            }
            "rx" => {
                layout.rx_positions.push(p);
                layout.rx_weights.push(w);
            }
            other => {
                return Err(Error::Parse {
                    line: n,
                    column: 1,
                    message: format!("role must be 'tx' or 'rx', found '{other}'"),
                })
            }
        }
    }
    layout.validate()?;
    Ok(layout)
}

// ----------------------------------------------------------- measurements

/// One row per sample, in storage order.
pub fn write_measurements_csv<W: Write>(mut w: W, ms: &MeasurementSet) -> Result<()> {
    writeln!(w, "{MEASUREMENT_HEADER}")?;
    let pairs = ms.pair_indices();
    for (fi, f) in ms.frequencies.iter().enumerate() {
        for ((t, r), s) in pairs.iter().zip(ms.frequency_block(fi)) {
            let tx = ms.layout.tx_positions[*t];
            let rx = ms.layout.rx_positions[*r];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                num(*f),
                num(tx.x),
                num(tx.y),
                num(tx.z),
                num(rx.x),
                num(rx.y),
                num(rx.z),
                num(s.re),
                num(s.im)
            )?;
        }
    }
    Ok(())
}

/// Distinct positions in order of first appearance, matched bitwise.
#[derive(Default)]
struct PositionTable {
    positions: Vec<Position3>,
    index: HashMap<[u64; 3], usize>,
}

impl PositionTable {
    fn intern(&mut self, p: Position3) -> usize {
        let next = self.positions.len();
        let i = *self.index.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_insert(next);
        if i == next {
            self.positions.push(p);
        }
        i
    }
}

/// Reads the CSV sample format.
///
/// Element tables are rebuilt from distinct positions in order of first
/// appearance. The format carries no quadrature weights, so every element
/// gets weight 1. Rows of one frequency must be contiguous and every
/// frequency must list the same pairs in the same order. A block that
/// enumerates every Rx with every Tx, Rx-major, is stored as a full matrix.
pub fn read_measurements_csv<R: BufRead>(r: R) -> Result<MeasurementSet> {
    let mut tx = PositionTable::default();
    let mut rx = PositionTable::default();
    let mut frequencies: Vec<f64> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut samples: Vec<C64> = Vec::new();
    let mut in_block = 0usize;

    for (n, line) in data_lines(r, MEASUREMENT_HEADER)? {
        let f = parse_fields(&line, n, 9)?;
        let v = f
            .iter()
            .enumerate()
            .map(|(c, s)| parse_f64(s, n, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        let freq = v[0];
        if frequencies.last() != Some(&freq) {
            if frequencies.contains(&freq) {
                return Err(Error::Parse {
                    line: n,
                    column: 1,
                    message: format!("rows for frequency {freq} are not contiguous"),
                });
            }
            if frequencies.len() > 1 && in_block != pairs.len() {
                return Err(Error::Parse {
                    line: n,
                    column: 1,
                    message: "frequency blocks list different numbers of pairs".into(),
                });
            }
            frequencies.push(freq);
            in_block = 0;
        }
        let t = tx.intern(Position3::new(v[1], v[2], v[3]));
        let rr = rx.intern(Position3::new(v[4], v[5], v[6]));
        if frequencies.len() == 1 {
            pairs.push((t, rr));
        } else if pairs.get(in_block) != Some(&(t, rr)) {
            return Err(Error::Parse {
                line: n,
                column: 2,
                message: "pair differs from the first frequency block".into(),
            });
        }
        in_block += 1;
        samples.push(C64::new(v[7], v[8]));
    }
    if frequencies.len() > 1 && in_block != pairs.len() {
        return Err(Error::Parse {
            line: 0,
            column: 1,
            message: "last frequency block is incomplete".into(),
        });
    }

    let (tx, rx) = (tx.positions, rx.positions);
    let (nt, nr) = (tx.len(), rx.len());
    let full = pairs.len() == nt * nr && pairs.iter().enumerate().all(|(i, p)| *p == (i % nt, i / nt));
    let layout = ArrayLayout::new(tx, vec![1.0; nt], rx, vec![1.0; nr])?;
    let pairing = if full { Pairing::FullMatrix } else { Pairing::Pairs(pairs) };
    MeasurementSet::new(layout, frequencies, samples, pairing)
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_f64<W: Write>(w: &mut W, x: f64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = get_u64(r)?;
    usize::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} count {n} too large")))
}

/// `NFBP` layout:
///
/// ```text
/// magic "NFBP" | version u16 | pairing u8 (0 full, 1 list)
/// n_freq, n_tx, n_rx, n_pairs: u64
/// frequencies: f64 * n_freq
/// tx table, rx table: (x, y, z, weight) f64 each
/// pair list (list pairing only): (tx u64, rx u64) * n_pairs
/// samples: (re, im) f64, [freq][rx][tx] or [freq][pair]
/// ```
pub fn write_measurements_bin<W: Write>(mut w: W, ms: &MeasurementSet) -> Result<()> {
    w.write_all(MEASUREMENT_MAGIC)?;
    w.write_all(&MEASUREMENT_VERSION.to_le_bytes())?;
    let kind: u8 = match ms.pairing {
        Pairing::FullMatrix => 0,
        Pairing::Pairs(_) => 1,
    };
    w.write_all(&[kind])?;
    for n in [ms.frequencies.len(), ms.n_tx(), ms.n_rx(), ms.pairs_per_frequency()] {
        put_u64(&mut w, n as u64)?;
    }
    for f in &ms.frequencies {
        put_f64(&mut w, *f)?;
    }
    let l = &ms.layout;
    for (ps, ws) in [(&l.tx_positions, &l.tx_weights), (&l.rx_positions, &l.rx_weights)] {
        for (p, wt) in ps.iter().zip(ws.iter()) {
            for x in [p.x, p.y, p.z, *wt] {
                put_f64(&mut w, x)?;
            }
        }
    }
    if let Pairing::Pairs(pairs) = &ms.pairing {
        for (t, r) in pairs {
            put_u64(&mut w, *t as u64)?;
            put_u64(&mut w, *r as u64)?;
        }
    }
    for s in &ms.samples {
        put_f64(&mut w, s.re)?;
        put_f64(&mut w, s.im)?;
    }
    Ok(())
}

pub fn read_measurements_bin<R: Read>(mut r: R) -> Result<MeasurementSet> {
    let bad = |m: String| Error::InvalidArgument(format!("not an NFBP file: {m}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MEASUREMENT_MAGIC {
        return Err(bad(format!("magic {magic:?}")));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != MEASUREMENT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let n_freq = get_count(&mut r, "frequency")?;
    let n_tx = get_count(&mut r, "tx")?;
    let n_rx = get_count(&mut r, "rx")?;
    let n_pairs = get_count(&mut r, "pair")?;
    let frequencies = (0..n_freq).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut table = |n: usize| -> Result<(Vec<Position3>, Vec<f64>)> {
        let mut ps = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for _ in 0..n {
            ps.push(Position3::new(get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?));
            ws.push(get_f64(&mut r)?);
        }
        Ok((ps, ws))
    };
    let (tp, tw) = table(n_tx)?;
    let (rp, rw) = table(n_rx)?;
    let pairing = match kind[0] {
        0 => Pairing::FullMatrix,
        1 => Pairing::Pairs(
            (0..n_pairs)
                .map(|_| Ok((get_count(&mut r, "index")?, get_count(&mut r, "index")?)))
                .collect::<Result<Vec<_>>>()?,
        ),
        k => return Err(bad(format!("pairing kind {k}"))),
    };
    let n_samples = n_freq
        .checked_mul(n_pairs)
        .ok_or_else(|| bad("sample count overflows".into()))?;
    let samples = (0..n_samples)
        .map(|_| Ok(C64::new(get_f64(&mut r)?, get_f64(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    let layout = ArrayLayout::new(tp, tw, rp, rw)?;
    MeasurementSet::new(layout, frequencies, samples, pairing)
}

/// Dataset file format, chosen by the caller or by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Bin,
}

impl DatasetFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DatasetFormat::Csv => "csv",
            DatasetFormat::Bin => "nfbp",
        }
    }

    /// `.csv` is CSV, anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Bin,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DatasetFormat::Csv),
            "bin" => Ok(DatasetFormat::Bin),
            _ => Err(Error::InvalidArgument(format!("format must be 'csv' or 'bin', got '{s}'"))),
        }
    }
}

pub fn save_measurements(path: &Path, ms: &MeasurementSet, format: DatasetFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        DatasetFormat::Csv => write_measurements_csv(&mut w, ms)?,
        DatasetFormat::Bin => write_measurements_bin(&mut w, ms)?,
    }
    Ok(w.flush()?)
}

/// Loads a dataset; the format follows the file extension.
pub fn load_measurements(path: &Path) -> Result<MeasurementSet> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let r = BufReader::new(file);
    let ms = match DatasetFormat::from_path(path) {
        DatasetFormat::Csv => read_measurements_csv(r),
        DatasetFormat::Bin => read_measurements_bin(r),
    };
    ms.map_err(|e| match e {
        Error::Io(io) => format_err(path, io.to_string()),
        Error::InvalidArgument(m) => format_err(path, m),
        other => other,
    })
}

pub fn save_layout(path: &Path, layout: &ArrayLayout) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_layout_csv(&mut w, layout)?;
    Ok(w.flush()?)
}

pub fn load_layout(path: &Path) -> Result<ArrayLayout> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    read_layout_csv(BufReader::new(file))
}

// ---------------------------------------------------------------- volumes

/// `NFIM` layout: magic, dims `u64 * 3` (x, y, z), origin `f64 * 3`,
/// spacing `f64 * 3`, then `(re, im)` pairs in `[z][y][x]` order.
pub fn write_volume<W: Write>(mut w: W, v: &ImageVolume) -> Result<()> {
    w.write_all(VOLUME_MAGIC)?;
    for d in v.grid.dims {
        put_u64(&mut w, d as u64)?;
    }
    let o = v.grid.origin;
    for x in [o.x, o.y, o.z] {
        put_f64(&mut w, x)?;
    }
    for s in v.grid.spacing {
        put_f64(&mut w, s)?;
    }
    for s in &v.voxels {
        put_f64(&mut w, s.re)?;
        put_f64(&mut w, s.im)?;
    }
    Ok(())
}

pub fn read_volume<R: Read>(mut r: R) -> Result<ImageVolume> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VOLUME_MAGIC {
        return Err(Error::InvalidArgument(format!("not an NFIM file: magic {magic:?}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = get_count(&mut r, "dimension")?;
    }
    let origin = Position3::new(get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?);
    let spacing = [get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?];
    let grid = ImageGrid::new(origin, spacing, dims)?;
    let voxels = (0..grid.len())
        .map(|_| Ok(C64::new(get_f64(&mut r)?, get_f64(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut v = ImageVolume::from_voxels(grid, voxels)?;
    v.normalized = (v.max_abs() - 1.0).abs() <= 4.0 * f64::EPSILON;
    Ok(v)
}

pub fn save_volume(path: &Path, v: &ImageVolume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_volume(&mut w, v)?;
    Ok(w.flush()?)
}

pub fn load_volume(path: &Path) -> Result<ImageVolume> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    read_volume(BufReader::new(file)).map_err(|e| match e {
        Error::Io(io) => format_err(path, io.to_string()),
        Error::InvalidArgument(m) => format_err(path, m),
        other => other,
    })
}

// ----------------------------------------------------------------- images

/// One text line per image row, comma-separated.
pub fn write_image_csv<W: Write>(mut w: W, img: &Image2D) -> Result<()> {
    for row in img.values.chunks(img.cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| num(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Gray level of a normalized magnitude: `[-40 dB, 0 dB]` onto `[0, 255]`.
pub fn gray_level(x: f64) -> u8 {
    let db = to_display_db(x);
    ((db - DISPLAY_RANGE_DB) / -DISPLAY_RANGE_DB * 255.0).round() as u8
}

/// 8-bit grayscale PNG, image row 0 first.
pub fn write_image_png<W: Write>(w: W, img: &Image2D) -> Result<()> {
    let width = u32::try_from(img.cols).map_err(|_| Error::InvalidArgument("image too wide".into()))?;
    let height = u32::try_from(img.rows).map_err(|_| Error::InvalidArgument("image too tall".into()))?;
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| Error::InvalidArgument(format!("png: {e}"));
    let mut writer = enc.write_header().map_err(to_err)?;
    let data: Vec<u8> = img.values.iter().map(|v| gray_level(*v)).collect();
    writer.write_image_data(&data).map_err(to_err)?;
    writer.finish().map_err(to_err)?;
    Ok(())
}

/// `key = value` extent description that accompanies a PNG.
pub fn write_image_sidecar<W: Write>(mut w: W, img: &Image2D) -> Result<()> {
    writeln!(w, "rows = {}", img.rows)?;
    writeln!(w, "cols = {}", img.cols)?;
    for (which, e) in [("row", &img.row_extent), ("col", &img.col_extent)] {
        writeln!(w, "{which}_axis = {}", e.name)?;
        writeln!(w, "{which}_first_m = {}", num(e.first))?;
        writeln!(w, "{which}_last_m = {}", num(e.last))?;
    }
    writeln!(w, "db_min = {DISPLAY_RANGE_DB}")?;
    writeln!(w, "db_max = 0")?;
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>.png` and `<stem>.txt` into `dir`.
pub fn save_image(dir: &Path, stem: &str, img: &Image2D) -> Result<()> {
    let mut csv = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
    write_image_csv(&mut csv, img)?;
    csv.flush()?;
    write_image_png(BufWriter::new(File::create(dir.join(format!("{stem}.png")))?), img)?;
    let mut side = BufWriter::new(File::create(dir.join(format!("{stem}.txt")))?);
    write_image_sidecar(&mut side, img)?;
    Ok(side.flush()?)
}
