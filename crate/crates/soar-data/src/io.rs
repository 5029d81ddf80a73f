use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{DataError, Dataset, DatasetMeta, SkeletonSequence};

pub const FORMAT_VERSION: u32 = 1;

const MAGIC: &[u8; 4] = b"SOAR";

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serializes one record's payload: ids, coordinates, packed mask. The CRC
/// trailer is computed over exactly these bytes.
fn record_payload(s: &SkeletonSequence) -> Vec<u8> {
    let mask_bytes = s.mask.len().div_ceil(8);
    let mut buf = Vec::with_capacity(16 + s.data.len() * 4 + mask_bytes);
    push_u32(&mut buf, s.label);
    push_u32(&mut buf, s.camera_id);
    push_u32(&mut buf, s.group_id);
    push_u32(&mut buf, s.subject_id);
    for v in &s.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    // Mask bits row-major (frame-major), LSB first within each byte.
    let mut packed = vec![0u8; mask_bytes];
    for (i, &m) in s.mask.iter().enumerate() {
        if m {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    buf.extend_from_slice(&packed);
    buf
}

/// Writes the dataset directory: `meta.json` plus `samples.bin`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DataError> {
    dataset.validate()?;
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_vec_pretty(&dataset.meta)?;
    fs::write(dir.join("meta.json"), meta)?;

    let mut bin = Vec::new();
    bin.extend_from_slice(MAGIC);
    push_u32(&mut bin, dataset.samples.len() as u32);
    for s in &dataset.samples {
        let payload = record_payload(s);
        let crc = crc32fast::hash(&payload);
        bin.extend_from_slice(&payload);
        push_u32(&mut bin, crc);
    }
    let mut f = fs::File::create(dir.join("samples.bin"))?;
    f.write_all(&bin)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.pos + n > self.buf.len() {
            return Err(DataError::Format(format!(
                "truncated file while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let meta_raw = fs::read(dir.join("meta.json"))?;
    let meta: DatasetMeta = serde_json::from_slice(&meta_raw)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(DataError::Format(format!(
            "unsupported format version {}",
            meta.format_version
        )));
    }

    let bin = fs::File::open(dir.join("samples.bin")).and_then(|mut f| {
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        Ok(buf)
    })?;
    let mut cur = Cursor { buf: &bin, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(DataError::Format("bad magic; not a dataset file".into()));
    }
    let count = cur.u32("record count")? as usize;

    let coords = meta.frames * meta.joints * meta.channels;
    let mask_bytes = (meta.frames * meta.joints).div_ceil(8);
    let payload_len = 16 + coords * 4 + mask_bytes;

    let mut samples = Vec::with_capacity(count);
    for rec in 0..count {
        let start = cur.pos;
        let payload = cur.take(payload_len, "record payload")?;
        let stored = cur.u32("record checksum")?;
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(DataError::Checksum {
                record: rec,
                stored,
                computed,
            });
        }
        let mut c = Cursor {
            buf: &bin[start..start + payload_len],
            pos: 0,
        };
        let label = c.u32("label")?;
        let camera_id = c.u32("camera_id")?;
        let group_id = c.u32("group_id")?;
        let subject_id = c.u32("subject_id")?;
        let mut data = Vec::with_capacity(coords);
        let raw = c.take(coords * 4, "coordinates")?;
        for ch in raw.chunks_exact(4) {
            data.push(f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]));
        }
        let packed = c.take(mask_bytes, "mask")?;
        let mut mask = Vec::with_capacity(meta.frames * meta.joints);
        for i in 0..meta.frames * meta.joints {
            mask.push(packed[i / 8] >> (i % 8) & 1 == 1);
        }
        samples.push(SkeletonSequence {
            label,
            camera_id,
            group_id,
            subject_id,
            frames: meta.frames,
            joints: meta.joints,
            channels: meta.channels,
            data,
            mask,
        });
    }
    if cur.pos != bin.len() {
        return Err(DataError::Format(format!(
            "{} trailing bytes after last record",
            bin.len() - cur.pos
        )));
    }

    let dataset = Dataset { meta, samples };
    dataset.validate()?;
    Ok(dataset)
}
