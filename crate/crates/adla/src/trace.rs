//! Trace-set data model and persistence.
//!
//! A [`TraceSet`] is an n_traces x n_samples matrix of leakage
//! measurements captured under one fixed input condition, stored
//! row-major (row = trace). The on-disk container is ADLA1, a 16-byte
//! little-endian header followed by the raw IEEE-754 payload:
//!
//! ```text
//! offset 0   magic      4 bytes  ASCII "ADLA"
//! offset 4   version    u8       1
//! offset 5   dtype      u8       0 = real32, 1 = real64
//! offset 6   reserved   2 bytes  zero
//! offset 8   n_traces   u32 LE
//! offset 12  n_samples  u32 LE
//! offset 16  payload    row-major n_traces * n_samples values, LE
//! ```
//!
//! The condition label travels in an optional `<name>.label` sidecar text
//! file next to the container; a missing sidecar means an empty label.
//! Per-trace metadata is deliberately absent: per-condition identity is
//! the only metadata the assessment pipeline needs.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Container magic.
pub const MAGIC: [u8; 4] = *b"ADLA";
/// Container version written and accepted.
pub const FORMAT_VERSION: u8 = 1;
/// Header length in bytes.
pub const HEADER_LEN: u64 = 16;

/// Payload element type.
///
/// CSV sources always load as `Real64`: the precision of a textual source
/// is unknowable, so the widest type is the safe choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Real32,
    Real64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::Real32 => 4,
            Dtype::Real64 => 8,
        }
    }

    fn code(self) -> u8 {
        match self {
            Dtype::Real32 => 0,
            Dtype::Real64 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::Real32),
            1 => Some(Dtype::Real64),
            _ => None,
        }
    }
}

/// Errors from trace construction and persistence.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o failure after writing {bytes_written} bytes")]
    WriteIo {
        #[source]
        source: io::Error,
        bytes_written: u64,
    },
    #[error("i/o failure while reading")]
    ReadIo(#[from] io::Error),
    #[error("bad magic {found:?}, expected \"ADLA\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("invalid dtype code {0}")]
    InvalidDtype(u8),
    #[error("reserved header bytes must be zero")]
    ReservedNonZero,
    #[error("a trace set needs at least one trace and one sample")]
    EmptyDimensions,
    #[error("matrix has {got} values but dimensions say {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("dimensions exceed the container's 32-bit limits")]
    TooLarge,
    #[error("payload holds {found} bytes, header dimensions require {expected}")]
    PayloadMismatch { expected: u64, found: u64 },
    #[error("non-finite value at trace {trace}, sample {sample}")]
    NonFinite { trace: usize, sample: usize },
    #[error("value at trace {trace}, sample {sample} is not representable as real32")]
    NotRepresentable { trace: usize, sample: usize },
    #[error("csv input is empty")]
    CsvEmpty,
    #[error("csv line {line} has {got} values, line 1 has {expected}")]
    CsvRagged {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("csv line {line}, column {column}: cannot parse {token:?} as a number")]
    CsvToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("trace sets have mismatched shapes: {a_traces}x{a_samples} vs {b_traces}x{b_samples}")]
    PairShapeMismatch {
        a_traces: usize,
        a_samples: usize,
        b_traces: usize,
        b_samples: usize,
    },
}

/// Matrix of leakage measurements for one fixed-input condition.
///
/// Immutable after construction; values are guaranteed finite, and when
/// the dtype is `Real32` every value round-trips through f32 exactly, so
/// persistence is lossless for both dtypes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    n_traces: usize,
    n_samples: usize,
    samples: Vec<f64>,
    label: String,
    dtype: Dtype,
}

impl TraceSet {
    /// Builds a trace set from a row-major sample buffer.
    pub fn new(
        n_traces: usize,
        n_samples: usize,
        samples: Vec<f64>,
        label: impl Into<String>,
        dtype: Dtype,
    ) -> Result<Self, TraceError> {
        if n_traces == 0 || n_samples == 0 {
            return Err(TraceError::EmptyDimensions);
        }
        let expected = n_traces
            .checked_mul(n_samples)
            .ok_or(TraceError::TooLarge)?;
        if samples.len() != expected {
            return Err(TraceError::ShapeMismatch {
                expected,
                got: samples.len(),
            });
        }
        if n_traces > u32::MAX as usize || n_samples > u32::MAX as usize {
            return Err(TraceError::TooLarge);
        }
        for (idx, v) in samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(TraceError::NonFinite {
                    trace: idx / n_samples,
                    sample: idx % n_samples,
                });
            }
            if dtype == Dtype::Real32 && (*v as f32) as f64 != *v {
                return Err(TraceError::NotRepresentable {
                    trace: idx / n_samples,
                    sample: idx % n_samples,
                });
            }
        }
        Ok(Self {
            n_traces,
            n_samples,
            samples,
            label: label.into(),
            dtype,
        })
    }

    pub fn n_traces(&self) -> usize {
        self.n_traces
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    /// Row `i`: all samples of trace `i` in time order.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    /// Raw row-major buffer.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Gathers column `j` (one value per trace) from the first `n_rows`
    /// traces into `out`.
    pub fn column_into(&self, j: usize, n_rows: usize, out: &mut Vec<f64>) {
        assert!(j < self.n_samples, "column index out of range");
        assert!(n_rows <= self.n_traces, "row limit exceeds trace count");
        out.clear();
        out.extend((0..n_rows).map(|i| self.samples[i * self.n_samples + j]));
    }

    /// Serializes the ADLA1 container into `sink`; returns bytes written.
    /// The label is not part of the byte stream (see the module docs).
    pub fn write_bytes<W: Write>(&self, sink: &mut W) -> Result<u64, TraceError> {
        let mut written = 0u64;
        let push = |sink: &mut W, bytes: &[u8], written: &mut u64| -> Result<(), TraceError> {
            sink.write_all(bytes).map_err(|source| TraceError::WriteIo {
                source,
                bytes_written: *written,
            })?;
            *written += bytes.len() as u64;
            Ok(())
        };

        let mut header = [0u8; HEADER_LEN as usize];
        header[0..4].copy_from_slice(&MAGIC);
        header[4] = FORMAT_VERSION;
        header[5] = self.dtype.code();
        header[8..12].copy_from_slice(&(self.n_traces as u32).to_le_bytes());
        header[12..16].copy_from_slice(&(self.n_samples as u32).to_le_bytes());
        push(sink, &header, &mut written)?;

        let mut buf = Vec::with_capacity(self.n_samples * self.dtype.width());
        for i in 0..self.n_traces {
            buf.clear();
            for v in self.row(i) {
                match self.dtype {
                    Dtype::Real32 => buf.extend_from_slice(&(*v as f32).to_le_bytes()),
                    Dtype::Real64 => buf.extend_from_slice(&v.to_le_bytes()),
                }
            }
            push(sink, &buf, &mut written)?;
        }
        Ok(written)
    }

    /// Parses one ADLA1 container from `source`. Reads exactly the header
    /// plus payload, so containers may be concatenated in a stream. The
    /// label comes back empty; file-level loading restores it from the
    /// sidecar.
    pub fn read_bytes<R: Read>(source: &mut R) -> Result<Self, TraceError> {
        let mut header = [0u8; HEADER_LEN as usize];
        source
            .read_exact(&mut header)
            .map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => TraceError::PayloadMismatch {
                    expected: HEADER_LEN,
                    found: 0,
                },
                _ => TraceError::ReadIo(e),
            })?;
        if header[0..4] != MAGIC {
            let mut found = [0u8; 4];
            found.copy_from_slice(&header[0..4]);
            return Err(TraceError::BadMagic { found });
        }
        if header[4] != FORMAT_VERSION {
            return Err(TraceError::UnsupportedVersion(header[4]));
        }
        let dtype = Dtype::from_code(header[5]).ok_or(TraceError::InvalidDtype(header[5]))?;
        if header[6] != 0 || header[7] != 0 {
            return Err(TraceError::ReservedNonZero);
        }
        let n_traces = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n_samples = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if n_traces == 0 || n_samples == 0 {
            return Err(TraceError::EmptyDimensions);
        }
        let count = n_traces as u64 * n_samples as u64;
        let width = dtype.width() as u64;
        if count > u64::MAX / width || count > usize::MAX as u64 {
            return Err(TraceError::TooLarge);
        }
        let expected_bytes = count * width;

        // Bounded read: allocation grows with data actually present, so a
        // corrupt header cannot trigger a giant up-front allocation.
        let mut payload = Vec::new();
        source
            .take(expected_bytes)
            .read_to_end(&mut payload)
            .map_err(TraceError::ReadIo)?;
        if payload.len() as u64 != expected_bytes {
            return Err(TraceError::PayloadMismatch {
                expected: expected_bytes,
                found: payload.len() as u64,
            });
        }

        let mut samples = Vec::with_capacity(count as usize);
        match dtype {
            Dtype::Real32 => {
                for chunk in payload.chunks_exact(4) {
                    samples.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
                }
            }
            Dtype::Real64 => {
                for chunk in payload.chunks_exact(8) {
                    samples.push(f64::from_le_bytes(chunk.try_into().unwrap()));
                }
            }
        }
        for (idx, v) in samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(TraceError::NonFinite {
                    trace: idx / n_samples,
                    sample: idx % n_samples,
                });
            }
        }
        Ok(Self {
            n_traces,
            n_samples,
            samples,
            label: String::new(),
            dtype,
        })
    }

    /// Writes the container to `path` and the label to `path.label` (the
    /// sidecar is removed when the label is empty). Returns container
    /// bytes written.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64, TraceError> {
        let path = path.as_ref();
        let mut file = io::BufWriter::new(fs::File::create(path)?);
        let written = self.write_bytes(&mut file)?;
        file.flush().map_err(|source| TraceError::WriteIo {
            source,
            bytes_written: written,
        })?;
        let sidecar = label_path(path);
        if self.label.is_empty() {
            match fs::remove_file(&sidecar) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(TraceError::ReadIo(e)),
            }
        } else {
            fs::write(&sidecar, &self.label)?;
        }
        Ok(written)
    }

    /// Loads a container from `path`, restoring the label from the
    /// sidecar when present. The file length must match the header
    /// exactly; trailing bytes are corruption.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let meta = fs::metadata(path)?;
        let mut file = io::BufReader::new(fs::File::open(path)?);
        let mut set = Self::read_bytes(&mut file)?;
        let expected =
            HEADER_LEN + set.n_traces as u64 * set.n_samples as u64 * set.dtype.width() as u64;
        if meta.len() != expected {
            return Err(TraceError::PayloadMismatch {
                expected,
                found: meta.len(),
            });
        }
        match fs::read_to_string(label_path(path)) {
            Ok(label) => set.label = label.trim_end_matches(['\n', '\r']).to_string(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(TraceError::ReadIo(e)),
        }
        Ok(set)
    }

    /// Parses comma-separated text: one trace per line, equal lengths,
    /// loaded as `Real64`.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, TraceError> {
        let mut text = String::new();
        let mut source = source;
        source.read_to_string(&mut text)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let mut row = Vec::new();
            for (col, token) in line.split(',').enumerate() {
                let trimmed = token.trim();
                let value: f64 =
                    trimmed
                        .parse()
                        .map_err(|_| TraceError::CsvToken {
                            line: line_no,
                            column: col + 1,
                            token: trimmed.to_string(),
                        })?;
                if !value.is_finite() {
                    return Err(TraceError::NonFinite {
                        trace: idx,
                        sample: col,
                    });
                }
                row.push(value);
            }
            if idx == 0 {
                width = row.len();
            } else if row.len() != width {
                return Err(TraceError::CsvRagged {
                    line: line_no,
                    expected: width,
                    got: row.len(),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(TraceError::CsvEmpty);
        }
        let n_traces = rows.len();
        let samples: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(n_traces, width, samples, "", Dtype::Real64)
    }
}

fn label_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".label");
    PathBuf::from(name)
}

/// Two equal-shape trace sets captured under two fixed input conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    a: TraceSet,
    b: TraceSet,
}

impl TracePair {
    /// Pairs two sets; both must have the same trace count and sample
    /// count (the pipeline assumes equal sample sizes per condition).
    pub fn new(a: TraceSet, b: TraceSet) -> Result<Self, TraceError> {
        if a.n_traces != b.n_traces || a.n_samples != b.n_samples {
            return Err(TraceError::PairShapeMismatch {
                a_traces: a.n_traces,
                a_samples: a.n_samples,
                b_traces: b.n_traces,
                b_samples: b.n_samples,
            });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &TraceSet {
        &self.a
    }

    pub fn b(&self) -> &TraceSet {
        &self.b
    }

    pub fn n_traces(&self) -> usize {
        self.a.n_traces
    }

    pub fn n_samples(&self) -> usize {
        self.a.n_samples
    }
}
