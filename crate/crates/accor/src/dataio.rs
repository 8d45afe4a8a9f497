//! Dataset persistence: the canonical binary container, a layout-driven
//! importer for externally published IQ recordings, and deterministic
//! train/test splitting.
//!
//! Container layout (all little-endian):
//!
//! ```text
//! magic   8 bytes  "ACCORIQ1"
//! version u16      1
//! band    f64      centre frequency in GHz
//! n_rx, n_tx, n_samples, n_frames, n_classes   u32 each
//! class names      n_classes × (u16 length + UTF-8 bytes)
//! frames  n_frames × [ label u16 | band tag u8 |
//!                      interleaved f32 I₀Q₀I₁Q₁…, channel-major ]
//! ```

use crate::ctensor::CTensor;
use crate::error::{Error, Result};
use crate::signal::{Band, IQFrame, N_RX, N_SAMPLES, N_TX, N_VIRTUAL};
use crate::wire::{self, Reader};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"ACCORIQ1";
pub const FORMAT_VERSION: u16 = 1;

/// Parsed container header.
#[derive(Debug, Clone)]
pub struct DatasetHeader {
    pub version: u16,
    pub band_ghz: f64,
    pub n_rx: u32,
    pub n_tx: u32,
    pub n_samples_per_channel: u32,
    pub n_frames: u32,
    pub n_classes: u32,
    pub class_names: Vec<String>,
}

/// Labeled frame collection with its class vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub band: Band,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub frames: Vec<IQFrame>,
}

impl Dataset {
    pub fn from_frames(
        frames: Vec<IQFrame>,
        n_classes: usize,
        class_names: Option<Vec<String>>,
        band: Band,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::usage("a dataset needs at least 2 classes"));
        }
        let class_names = match class_names {
            Some(names) => {
                if names.len() != n_classes {
                    return Err(Error::usage(format!(
                        "{} class names for {} classes",
                        names.len(),
                        n_classes
                    )));
                }
                names
            }
            None => (0..n_classes).map(|c| format!("class_{c}")).collect(),
        };
        for f in &frames {
            if f.label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: f.label,
                    n_classes,
                });
            }
        }
        Ok(Dataset {
            band,
            n_classes,
            class_names,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for f in &self.frames {
            counts[f.label] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.label).collect()
    }
}

/// Serialize a dataset to the canonical container.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    wire::write_u16(&mut w, FORMAT_VERSION)?;
    wire::write_f64(&mut w, dataset.band.ghz())?;
    wire::write_u32(&mut w, N_RX as u32)?;
    wire::write_u32(&mut w, N_TX as u32)?;
    wire::write_u32(&mut w, N_SAMPLES as u32)?;
    wire::write_u32(&mut w, dataset.frames.len() as u32)?;
    wire::write_u32(&mut w, dataset.n_classes as u32)?;
    for name in &dataset.class_names {
        wire::write_string(&mut w, name)?;
    }
    for frame in &dataset.frames {
        if frame.label > u16::MAX as usize {
            return Err(Error::usage("label exceeds container range"));
        }
        wire::write_u16(&mut w, frame.label as u16)?;
        wire::write_u8(&mut w, frame.band.tag())?;
        let mut vals = Vec::with_capacity(frame.data.len() * 2);
        for i in 0..frame.data.len() {
            vals.push(frame.data.re()[i] as f32);
            vals.push(frame.data.im()[i] as f32);
        }
        wire::write_f32_slice(&mut w, &vals)?;
    }
    w.flush()?;
    Ok(())
}

/// Read and fully validate a canonical container.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut r = Reader::new(BufReader::new(file));

    let magic = r.read_bytes(8)?;
    if magic != MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let version = r.read_u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported container version {version} (reader supports {FORMAT_VERSION})"
        )));
    }
    let band_ghz = r.read_f64()?;
    let band = if (band_ghz - 67.0).abs() < 0.5 {
        Band::Ghz67
    } else if (band_ghz - 64.0).abs() < 0.5 {
        Band::Ghz64
    } else {
        return Err(Error::format(format!("unsupported band {band_ghz} GHz")));
    };
    let n_rx = r.read_u32()?;
    let n_tx = r.read_u32()?;
    let n_samples = r.read_u32()?;
    let n_frames = r.read_u32()?;
    let n_classes = r.read_u32()?;
    if n_rx as usize != N_RX || n_tx as usize != N_TX || n_samples as usize != N_SAMPLES {
        return Err(Error::format(format!(
            "unsupported frame geometry {n_rx}×{n_tx} Rx·Tx with {n_samples} samples; \
             this pipeline is fixed at {N_RX}×{N_TX}×{N_SAMPLES}"
        )));
    }
    if n_classes < 2 {
        return Err(Error::format("header declares fewer than 2 classes"));
    }
    let mut class_names = Vec::with_capacity(n_classes as usize);
    for _ in 0..n_classes {
        class_names.push(r.read_string()?);
    }

    let mut frames = Vec::with_capacity(n_frames as usize);
    for fi in 0..n_frames as usize {
        r.frame_context = Some(fi);
        let label = r.read_u16()? as usize;
        if label >= n_classes as usize {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: n_classes as usize,
            });
        }
        let band_tag = Band::from_tag(r.read_u8()?)?;
        let vals = r.read_f32_slice(N_VIRTUAL * N_SAMPLES * 2)?;
        let mut re = Vec::with_capacity(N_VIRTUAL * N_SAMPLES);
        let mut im = Vec::with_capacity(N_VIRTUAL * N_SAMPLES);
        for pair in vals.chunks_exact(2) {
            re.push(pair[0] as f64);
            im.push(pair[1] as f64);
        }
        let data = CTensor::from_planes(&[N_VIRTUAL, N_SAMPLES], re, im)?;
        frames.push(IQFrame::new(data, label, band_tag)?);
    }
    r.frame_context = None;
    r.at_eof()?;

    Dataset::from_frames(frames, n_classes as usize, Some(class_names), band)
}

// ── external import ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// I₀Q₀I₁Q₁… pairs.
    Interleaved,
    /// All real samples, then all imaginary samples.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    I16,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::I16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

/// Declaration of an external dataset's on-disk layout.
#[derive(Debug, Clone)]
pub struct ImportLayout {
    pub shape: (usize, usize),
    pub encoding: Encoding,
    pub dtype: Dtype,
    pub byte_order: ByteOrder,
    /// class name → label index; file labels resolve through directory or
    /// file-stem names.
    pub label_map: Vec<(String, usize)>,
    pub band: Band,
}

impl ImportLayout {
    /// Parse the key-value descriptor format:
    ///
    /// ```text
    /// shape = 400x100
    /// encoding = interleaved | planar
    /// dtype = f32 | f64 | i16
    /// byte_order = little | big
    /// label_map = hammer:0, mug:1, ...
    /// band = 64 | 67
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut shape = None;
        let mut encoding = None;
        let mut dtype = None;
        let mut byte_order = None;
        let mut label_map: Option<Vec<(String, usize)>> = None;
        let mut band = Band::Ghz64;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(format!("layout line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "shape" => {
                    let (a, b) = value.split_once(['x', 'X']).ok_or_else(|| {
                        Error::format(format!("layout shape '{value}' must look like 400x100"))
                    })?;
                    let rows = a.trim().parse::<usize>().map_err(|_| {
                        Error::format(format!("layout shape '{value}' not numeric"))
                    })?;
                    let cols = b.trim().parse::<usize>().map_err(|_| {
                        Error::format(format!("layout shape '{value}' not numeric"))
                    })?;
                    shape = Some((rows, cols));
                }
                "encoding" => {
                    encoding = Some(match value {
                        "interleaved" => Encoding::Interleaved,
                        "planar" => Encoding::Planar,
                        other => {
                            return Err(Error::format(format!("unknown encoding '{other}'")))
                        }
                    });
                }
                "dtype" => {
                    dtype = Some(match value {
                        "f32" => Dtype::F32,
                        "f64" => Dtype::F64,
                        "i16" => Dtype::I16,
                        other => return Err(Error::format(format!("unknown dtype '{other}'"))),
                    });
                }
                "byte_order" => {
                    byte_order = Some(match value {
                        "little" => ByteOrder::Little,
                        "big" => ByteOrder::Big,
                        other => {
                            return Err(Error::format(format!("unknown byte order '{other}'")))
                        }
                    });
                }
                "label_map" => {
                    let mut map = Vec::new();
                    for entry in value.split(',') {
                        let entry = entry.trim();
                        if entry.is_empty() {
                            continue;
                        }
                        let (name, idx) = entry.split_once(':').ok_or_else(|| {
                            Error::format(format!("label_map entry '{entry}' must be name:index"))
                        })?;
                        let idx = idx.trim().parse::<usize>().map_err(|_| {
                            Error::format(format!("label_map index in '{entry}' not numeric"))
                        })?;
                        map.push((name.trim().to_string(), idx));
                    }
                    label_map = Some(map);
                }
                "band" => {
                    band = match value {
                        "64" => Band::Ghz64,
                        "67" => Band::Ghz67,
                        other => return Err(Error::format(format!("unknown band '{other}'"))),
                    };
                }
                other => {
                    return Err(Error::format(format!("unknown layout key '{other}'")));
                }
            }
        }

        let shape = shape.ok_or_else(|| Error::format("layout missing 'shape'"))?;
        let encoding = encoding.ok_or_else(|| Error::format("layout missing 'encoding'"))?;
        let dtype = dtype.ok_or_else(|| Error::format("layout missing 'dtype'"))?;
        let byte_order = byte_order.ok_or_else(|| Error::format("layout missing 'byte_order'"))?;
        let label_map = label_map.ok_or_else(|| Error::format("layout missing 'label_map'"))?;
        if label_map.is_empty() {
            return Err(Error::format("label_map is empty"));
        }
        Ok(ImportLayout {
            shape,
            encoding,
            dtype,
            byte_order,
            label_map,
            band,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ImportLayout::parse(&text)
    }

    fn n_classes(&self) -> Result<usize> {
        let max = self.label_map.iter().map(|(_, i)| *i).max().unwrap_or(0);
        let n = max + 1;
        if n < 2 {
            return Err(Error::format("label_map must define at least 2 classes"));
        }
        let mut names = vec![None; n];
        for (name, idx) in &self.label_map {
            names[*idx] = Some(name.clone());
        }
        if names.iter().any(|n| n.is_none()) {
            return Err(Error::format("label_map has gaps in its index range"));
        }
        Ok(n)
    }

    fn class_names(&self) -> Vec<String> {
        let n = self.label_map.iter().map(|(_, i)| *i).max().unwrap_or(0) + 1;
        let mut names = vec![String::new(); n];
        for (name, idx) in &self.label_map {
            names[*idx] = name.clone();
        }
        names
    }
}

fn decode_values(bytes: &[u8], layout: &ImportLayout) -> Vec<f64> {
    let w = layout.dtype.width();
    bytes
        .chunks_exact(w)
        .map(|c| match (layout.dtype, layout.byte_order) {
            (Dtype::F32, ByteOrder::Little) => {
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64
            }
            (Dtype::F32, ByteOrder::Big) => f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64,
            (Dtype::F64, ByteOrder::Little) => {
                f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
            }
            (Dtype::F64, ByteOrder::Big) => {
                f64::from_be_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
            }
            (Dtype::I16, ByteOrder::Little) => i16::from_le_bytes([c[0], c[1]]) as f64,
            (Dtype::I16, ByteOrder::Big) => i16::from_be_bytes([c[0], c[1]]) as f64,
        })
        .collect()
}

fn encode_values(vals: &[f64], layout: &ImportLayout) -> Vec<u8> {
    let mut out = Vec::with_capacity(vals.len() * layout.dtype.width());
    for &v in vals {
        match (layout.dtype, layout.byte_order) {
            (Dtype::F32, ByteOrder::Little) => out.extend_from_slice(&(v as f32).to_le_bytes()),
            (Dtype::F32, ByteOrder::Big) => out.extend_from_slice(&(v as f32).to_be_bytes()),
            (Dtype::F64, ByteOrder::Little) => out.extend_from_slice(&v.to_le_bytes()),
            (Dtype::F64, ByteOrder::Big) => out.extend_from_slice(&v.to_be_bytes()),
            (Dtype::I16, ByteOrder::Little) => {
                out.extend_from_slice(&(v.round().clamp(-32768.0, 32767.0) as i16).to_le_bytes())
            }
            (Dtype::I16, ByteOrder::Big) => {
                out.extend_from_slice(&(v.round().clamp(-32768.0, 32767.0) as i16).to_be_bytes())
            }
        }
    }
    out
}

/// Convert one raw file into planes according to the layout.
fn decode_frame(bytes: &[u8], layout: &ImportLayout) -> Result<CTensor> {
    let (ch, n) = layout.shape;
    let expected = ch * n * 2 * layout.dtype.width();
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "frame payload is {} bytes, layout {}×{} {:?} expects {}",
            bytes.len(),
            ch,
            n,
            layout.dtype,
            expected
        )));
    }
    let vals = decode_values(bytes, layout);
    let count = ch * n;
    let (mut re, mut im) = (Vec::with_capacity(count), Vec::with_capacity(count));
    match layout.encoding {
        Encoding::Interleaved => {
            for pair in vals.chunks_exact(2) {
                re.push(pair[0]);
                im.push(pair[1]);
            }
        }
        Encoding::Planar => {
            re.extend_from_slice(&vals[..count]);
            im.extend_from_slice(&vals[count..]);
        }
    }
    CTensor::from_planes(&[ch, n], re, im)
}

fn encode_frame(data: &CTensor, layout: &ImportLayout) -> Vec<u8> {
    let count = data.len();
    let mut vals = Vec::with_capacity(count * 2);
    match layout.encoding {
        Encoding::Interleaved => {
            for i in 0..count {
                vals.push(data.re()[i]);
                vals.push(data.im()[i]);
            }
        }
        Encoding::Planar => {
            vals.extend_from_slice(data.re());
            vals.extend_from_slice(data.im());
        }
    }
    encode_values(&vals, layout)
}

/// Import a directory of raw per-frame files into the canonical container
/// format. Files are labeled by their parent directory name, or by the
/// file-stem prefix before the first `_`, resolved through the layout's
/// `label_map`. Conversion is lossless up to the declared numeric width.
pub fn import_external(root: &Path, layout: &ImportLayout) -> Result<Dataset> {
    if layout.shape != (N_VIRTUAL, N_SAMPLES) {
        return Err(Error::format(format!(
            "layout declares shape {}x{}, this pipeline requires {N_VIRTUAL}x{N_SAMPLES}",
            layout.shape.0, layout.shape.1
        )));
    }
    let n_classes = layout.n_classes()?;

    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();
    if files.is_empty() {
        return Err(Error::usage(format!("no files found under {}", root.display())));
    }

    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let label = resolve_label(path, layout)?;
        let bytes = std::fs::read(path)?;
        let data = decode_frame(&bytes, layout)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        frames.push(IQFrame::new(data, label, layout.band)?);
    }
    Dataset::from_frames(frames, n_classes, Some(layout.class_names()), layout.band)
}

/// Write a dataset as raw per-frame files in the given layout, one
/// directory per class. The inverse of [`import_external`]; mainly useful
/// for interoperability tests and demos.
pub fn export_external(dataset: &Dataset, root: &Path, layout: &ImportLayout) -> Result<()> {
    for (i, frame) in dataset.frames.iter().enumerate() {
        let dir = root.join(&dataset.class_names[frame.label]);
        std::fs::create_dir_all(&dir)?;
        let bytes = encode_frame(&frame.data, layout);
        let mut f = File::create(dir.join(format!("frame_{i:06}.iq")))?;
        f.write_all(&bytes)?;
    }
    Ok(())
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn resolve_label(path: &Path, layout: &ImportLayout) -> Result<usize> {
    let parent = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("");
    for (name, idx) in &layout.label_map {
        if name == parent {
            return Ok(*idx);
        }
    }
    let stem = path
        .file_stem()
        .and_then(|n| n.to_str())
        .unwrap_or("")
        .split('_')
        .next()
        .unwrap_or("");
    for (name, idx) in &layout.label_map {
        if name == stem {
            return Ok(*idx);
        }
    }
    Err(Error::format(format!(
        "cannot resolve class label for {} from directory '{parent}' or stem '{stem}'",
        path.display()
    )))
}

// ── train/test split ────────────────────────────────────────────────────

/// Deterministic split policy.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

/// Partition frame indices into disjoint, exhaustive train/test sets.
///
/// Stratified mode preserves per-class proportions to within one frame
/// (largest-remainder rounding, ties to the lower class index). The test
/// set always receives at least one frame.
pub fn split_train_test(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    split_labels(&dataset.labels(), dataset.n_classes, spec)
}

/// Label-level splitting shared by the dataset and in-memory paths.
pub fn split_labels(
    labels: &[usize],
    n_classes: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.is_empty() {
        return Err(Error::usage("cannot split an empty dataset"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::usage(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n = labels.len();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let (mut train, mut test) = if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        // largest-remainder apportionment of the global train total
        let total_train = ((spec.train_fraction * n as f64).round() as usize).min(n - 1);
        let targets: Vec<f64> = by_class
            .iter()
            .map(|ids| spec.train_fraction * ids.len() as f64)
            .collect();
        let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
        let mut remaining = total_train.saturating_sub(counts.iter().sum::<usize>());
        let mut order: Vec<usize> = (0..n_classes).collect();
        order.sort_by(|&a, &b| {
            let fa = targets[a] - targets[a].floor();
            let fb = targets[b] - targets[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &c in order.iter().cycle().take(n_classes * 2) {
            if remaining == 0 {
                break;
            }
            if counts[c] < by_class[c].len() {
                counts[c] += 1;
                remaining -= 1;
            }
        }
        // the test set must not be empty
        if counts.iter().sum::<usize>() >= n {
            let donor = (0..n_classes)
                .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
                .unwrap();
            counts[donor] -= 1;
        }

        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..n_classes {
            let mut ids = by_class[c].clone();
            ids.shuffle(&mut rng);
            train.extend_from_slice(&ids[..counts[c]]);
            test.extend_from_slice(&ids[counts[c]..]);
        }
        (train, test)
    } else {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        let count = ((spec.train_fraction * n as f64).round() as usize).min(n - 1);
        (ids[..count].to_vec(), ids[count..].to_vec())
    };

    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
