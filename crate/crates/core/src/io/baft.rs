//! The `.baft` embedding dataset format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! header   magic "BAFT" | version u16 = 1 | flags u16 | D u32 | J u32 | B u32 | N u64
//! names    (flags bit 1) J × { len u16, UTF-8 bytes }
//! text     J × D f32, raw per-class text embeddings
//! records  N × { label i32 (-1 = absent), B × D f32 }
//! ```
//!
//! Flag bit 0 marks that labels are present. The file length must match the
//! header arithmetic exactly.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClassModel, StreamRecord};
use crate::vector::{check_dim, EmbeddingVector};

pub const MAGIC: [u8; 4] = *b"BAFT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 28;
pub const FLAG_LABELS: u16 = 1;
pub const FLAG_NAMES: u16 = 1 << 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaftHeader {
    pub version: u16,
    pub flags: u16,
    pub dim: u32,
    pub classes: u32,
    pub views: u32,
    pub records: u64,
}

impl BaftHeader {
    pub fn has_labels(&self) -> bool {
        self.flags & FLAG_LABELS != 0
    }

    pub fn has_names(&self) -> bool {
        self.flags & FLAG_NAMES != 0
    }

    /// Bytes per record.
    pub fn record_len(&self) -> u64 {
        4 + 4 * u64::from(self.views) * u64::from(self.dim)
    }

    fn to_bytes(self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&self.flags.to_le_bytes());
        b[8..12].copy_from_slice(&self.dim.to_le_bytes());
        b[12..16].copy_from_slice(&self.classes.to_le_bytes());
        b[16..20].copy_from_slice(&self.views.to_le_bytes());
        b[20..28].copy_from_slice(&self.records.to_le_bytes());
        b
    }

    fn parse(b: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let header = Self {
            version: u16_at(4),
            flags: u16_at(6),
            dim: u32_at(8),
            classes: u32_at(12),
            views: u32_at(16),
            records: u64::from_le_bytes(b[20..28].try_into().unwrap()),
        };
        if header.version != VERSION {
            return Err(Error::VersionUnsupported(header.version));
        }
        if header.flags & !(FLAG_LABELS | FLAG_NAMES) != 0 {
            return Err(Error::BadHeader(format!("unknown flag bits {:#06x}", header.flags)));
        }
        if header.dim < 2 || header.classes < 2 || header.views < 1 {
            return Err(Error::BadHeader(format!(
                "need D >= 2, J >= 2, B >= 1; got D={} J={} B={}",
                header.dim, header.classes, header.views
            )));
        }
        Ok(header)
    }
}

/// Tracks how many bytes the inner reader has produced.
struct CountingReader<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}

impl<R: Read> CountingReader<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.read_exact(buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Truncated { offset: self.pos },
            _ => Error::Io(e),
        })
    }

    fn read_f32s(&mut self, count: usize, scratch: &mut Vec<u8>) -> Result<Vec<f64>> {
        scratch.resize(count * 4, 0);
        self.fill(scratch)?;
        Ok(scratch
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

/// Lazily yields records in file order.
pub struct DatasetReader<R> {
    reader: CountingReader<R>,
    header: BaftHeader,
    next: u64,
    scratch: Vec<u8>,
    failed: bool,
}

impl<R: Read> DatasetReader<R> {
    pub fn header(&self) -> &BaftHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<StreamRecord> {
        let index = self.next;
        let mut label = [0u8; 4];
        self.reader.fill(&mut label)?;
        let label = i32::from_le_bytes(label);
        let dim = self.header.dim as usize;
        let values = self
            .reader
            .read_f32s(self.header.views as usize * dim, &mut self.scratch)?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { record: Some(index) });
        }
        let label = match label {
            -1 => None,
            l if l >= 0 && (l as u32) < self.header.classes && self.header.has_labels() => Some(l as usize),
            l => return Err(Error::InvalidLabel { record: index, label: l }),
        };
        let views = values
            .chunks_exact(dim)
            .map(|c| EmbeddingVector::from_vec_unchecked(c.to_vec()))
            .collect();
        Ok(StreamRecord {
            example_id: index,
            label,
            views,
        })
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<StreamRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.header.records {
            return None;
        }
        let out = self.read_record();
        self.next += 1;
        if out.is_err() {
            self.failed = true;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.header.records - self.next) as usize;
        (0, Some(left))
    }
}

/// Parses the header, class names and text embeddings from `reader`.
///
/// When `total_len` is known it is checked against the header arithmetic
/// before any record is read; a short file still yields every complete record
/// and then reports `Truncated`.
pub fn read_from<R: Read>(reader: R, total_len: Option<u64>) -> Result<(ClassModel, DatasetReader<R>)> {
    let mut reader = CountingReader { inner: reader, pos: 0 };
    let mut hb = [0u8; HEADER_LEN as usize];
    reader.fill(&mut hb)?;
    let header = BaftHeader::parse(&hb)?;
    let classes = header.classes as usize;
    let dim = header.dim as usize;

    let names = if header.has_names() {
        let mut names = Vec::with_capacity(classes);
        for _ in 0..classes {
            let mut len = [0u8; 2];
            reader.fill(&mut len)?;
            let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
            reader.fill(&mut buf)?;
            let name = String::from_utf8(buf).map_err(|_| Error::BadHeader("class name is not UTF-8".into()))?;
            names.push(name);
        }
        Some(names)
    } else {
        None
    };

    let mut scratch = Vec::new();
    let text = reader.read_f32s(classes * dim, &mut scratch)?;
    if text.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { record: None });
    }

    if let Some(len) = total_len {
        let expected = header
            .records
            .checked_mul(header.record_len())
            .and_then(|r| r.checked_add(reader.pos))
            .ok_or_else(|| Error::BadHeader("record count overflows file size".into()))?;
        if len > expected {
            return Err(Error::TrailingBytes { extra: len - expected });
        }
    }

    let text_embeddings = text
        .chunks_exact(dim)
        .map(|c| EmbeddingVector::from_vec_unchecked(c.to_vec()))
        .collect();
    let model = ClassModel::new(text_embeddings, names)?;
    Ok((
        model,
        DatasetReader {
            reader,
            header,
            next: 0,
            scratch,
            failed: false,
        },
    ))
}

/// Opens a `.baft` file for streaming.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(ClassModel, DatasetReader<BufReader<File>>)> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    read_from(BufReader::new(file), Some(len))
}

/// Writes `records` after the class model's header and sections.
///
/// `B` is taken from the first record (1 when there are none); every record
/// must match it and the model dimension.
pub fn write_to<W: Write>(mut w: W, class_model: &ClassModel, records: &[StreamRecord]) -> Result<()> {
    let dim = class_model.dim();
    let classes = class_model.class_count();
    let views = records.first().map_or(1, |r| r.views.len());
    for r in records {
        check_dim(views, r.views.len())?;
        for v in &r.views {
            check_dim(dim, v.dim())?;
        }
        if let Some(l) = r.label {
            if l >= classes {
                return Err(Error::InvalidLabel {
                    record: r.example_id,
                    label: l as i32,
                });
            }
        }
    }
    let mut flags = 0;
    if records.iter().any(|r| r.label.is_some()) {
        flags |= FLAG_LABELS;
    }
    if class_model.class_names().is_some() {
        flags |= FLAG_NAMES;
    }
    let to_u32 = |x: usize, what: &str| {
        u32::try_from(x).map_err(|_| Error::BadHeader(format!("{what} {x} exceeds u32")))
    };
    let header = BaftHeader {
        version: VERSION,
        flags,
        dim: to_u32(dim, "dimension")?,
        classes: to_u32(classes, "class count")?,
        views: to_u32(views, "view count")?,
        records: records.len() as u64,
    };
    w.write_all(&header.to_bytes())?;

    if let Some(names) = class_model.class_names() {
        for name in names {
            let len = u16::try_from(name.len())
                .map_err(|_| Error::BadHeader(format!("class name longer than {} bytes", u16::MAX)))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
    }
    let write_f32s = |w: &mut W, v: &EmbeddingVector| -> Result<()> {
        for &x in v.as_slice() {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    };
    for t in class_model.text_embeddings() {
        write_f32s(&mut w, t)?;
    }
    for r in records {
        let label = r.label.map_or(-1, |l| l as i32);
        w.write_all(&label.to_le_bytes())?;
        for v in &r.views {
            write_f32s(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: impl AsRef<Path>, class_model: &ClassModel, records: &[StreamRecord]) -> Result<()> {
    let file = File::create(path)?;
    write_to(BufWriter::new(file), class_model, records)
}
