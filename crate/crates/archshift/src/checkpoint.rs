//! Binary training checkpoints. One file holds every tensor and counter a
//! resumed run needs to continue bit-for-bit: model and generator weights,
//! distribution logits, Adam moments, the snapshot bracket, step counters,
//! and the RNG stream positions.
//!
//! Layout: magic, format version, payload, then an FNV-1a digest of all
//! preceding bytes. All integers and floats are little-endian. Tensors are
//! written as name-sorted tables of (name, rows, cols, data). Writes go to
//! a temp file in the target directory and are renamed into place.

use std::collections::HashMap;
use std::path::Path;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::rng::STREAM_COUNT;
use crate::supernet::WeightSnapshot;

pub const MAGIC: [u8; 8] = *b"ARSHCKPT";
pub const VERSION: u32 = 1;

/// Adam state: step counter plus (name, first moment, second moment).
pub type AdamState = (u64, Vec<(String, Matrix, Matrix)>);

#[derive(Debug, Clone)]
pub struct CheckpointState {
    pub iteration: u64,
    pub epoch: u64,
    pub count_since_update: u64,
    pub update_count: u64,
    pub pinned: bool,
    pub rng_positions: [u128; STREAM_COUNT],
    pub net: WeightSnapshot,
    pub gen: WeightSnapshot,
    pub dist: WeightSnapshot,
    pub adam_ag: AdamState,
    pub adam_b: AdamState,
    pub w_prev: Option<WeightSnapshot>,
}

pub fn save(path: &Path, state: &CheckpointState) -> Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_u64(&mut buf, state.iteration);
    put_u64(&mut buf, state.epoch);
    put_u64(&mut buf, state.count_since_update);
    put_u64(&mut buf, state.update_count);
    buf.push(state.pinned as u8);
    for p in &state.rng_positions {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    put_table(&mut buf, &state.net);
    put_table(&mut buf, &state.gen);
    put_table(&mut buf, &state.dist);
    put_adam(&mut buf, &state.adam_ag);
    put_adam(&mut buf, &state.adam_b);
    match &state.w_prev {
        Some(snap) => {
            buf.push(1);
            put_table(&mut buf, snap);
        }
        None => buf.push(0),
    }
    let digest = fnv1a(&buf);
    put_u64(&mut buf, digest);

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<CheckpointState> {
    let buf = std::fs::read(path)?;
    if buf.len() < MAGIC.len() + 4 + 8 {
        return Err(Error::checkpoint("file too short to be a checkpoint"));
    }
    let (body, tail) = buf.split_at(buf.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a(body) != stored {
        return Err(Error::checkpoint("checksum mismatch: truncated or corrupt"));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::checkpoint("not a checkpoint file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::checkpoint(format!(
            "format version {} (this build reads {})",
            version, VERSION
        )));
    }
    let iteration = r.u64()?;
    let epoch = r.u64()?;
    let count_since_update = r.u64()?;
    let update_count = r.u64()?;
    let pinned = r.u8()? != 0;
    let mut rng_positions = [0u128; STREAM_COUNT];
    for p in rng_positions.iter_mut() {
        *p = r.u128()?;
    }
    let net = r.table()?;
    let gen = r.table()?;
    let dist = r.table()?;
    let adam_ag = r.adam()?;
    let adam_b = r.adam()?;
    let w_prev = if r.u8()? != 0 { Some(r.table()?) } else { None };
    if r.pos != r.buf.len() {
        return Err(Error::checkpoint("trailing bytes after payload"));
    }
    Ok(CheckpointState {
        iteration,
        epoch,
        count_since_update,
        update_count,
        pinned,
        rng_positions,
        net,
        gen,
        dist,
        adam_ag,
        adam_b,
        w_prev,
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_matrix(buf: &mut Vec<u8>, m: &Matrix) {
    put_u64(buf, m.rows() as u64);
    put_u64(buf, m.cols() as u64);
    for &x in m.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_table(buf: &mut Vec<u8>, table: &HashMap<String, Matrix>) {
    let mut names: Vec<&String> = table.keys().collect();
    names.sort();
    put_u64(buf, names.len() as u64);
    for name in names {
        put_str(buf, name);
        put_matrix(buf, &table[name]);
    }
}

fn put_adam(buf: &mut Vec<u8>, (t, slots): &AdamState) {
    put_u64(buf, *t);
    put_u64(buf, slots.len() as u64);
    for (name, m, v) in slots {
        put_str(buf, name);
        put_matrix(buf, m);
        put_matrix(buf, v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::checkpoint("payload ends mid-record"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::checkpoint("tensor name is not UTF-8"))
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::checkpoint("tensor shape overflows"))?;
        let bytes = self.take(n * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn table(&mut self) -> Result<HashMap<String, Matrix>> {
        let n = self.u64()? as usize;
        let mut out = HashMap::with_capacity(n);
        for _ in 0..n {
            let name = self.string()?;
            let m = self.matrix()?;
            if out.insert(name, m).is_some() {
                return Err(Error::checkpoint("duplicate tensor name in table"));
            }
        }
        Ok(out)
    }

    fn adam(&mut self) -> Result<AdamState> {
        let t = self.u64()?;
        let n = self.u64()? as usize;
        let mut slots = Vec::with_capacity(n);
        for _ in 0..n {
            let name = self.string()?;
            let m = self.matrix()?;
            let v = self.matrix()?;
            slots.push((name, m, v));
        }
        Ok((t, slots))
    }
}
