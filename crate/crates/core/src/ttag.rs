//! The TTAG binary time-tag file format.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TTAG"
//! 4       1     version (1)
//! 5       8     tick resolution in femtoseconds (u64)
//! 13      9·n   records: channel (u8), tick count (u64)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TTAG";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: u64 = 13;
pub const RECORD_LEN: u64 = 9;

/// Tick length of the time tagger, 156 ps.
pub const TICK_FS: u64 = 156_000;
pub const TICK_PS: u64 = TICK_FS / 1000;
pub const TICK_NS: f64 = TICK_FS as f64 * 1e-6;

/// One detection: a tick count on a channel. Ordering is by tick, then
/// channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    pub tick: u64,
    pub channel: u8,
}

impl TimeTag {
    pub fn new(channel: u8, tick: u64) -> Self {
        Self { tick, channel }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagFile {
    pub tick_fs: u64,
    pub tags: Vec<TimeTag>,
}

pub fn write_to<W: Write>(mut w: W, tick_fs: u64, tags: &[TimeTag]) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&tick_fs.to_le_bytes())?;
    let mut rec = [0u8; RECORD_LEN as usize];
    for t in tags {
        rec[0] = t.channel;
        rec[1..].copy_from_slice(&t.tick.to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()
}

pub fn write_file(path: &Path, tick_fs: u64, tags: &[TimeTag]) -> Result<()> {
    let f = File::create(path)?;
    write_to(BufWriter::new(f), tick_fs, tags)?;
    Ok(())
}

/// Fills `buf` as far as possible; returns the number of bytes read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub fn read_from<R: Read>(mut r: R) -> Result<TagFile> {
    let mut header = [0u8; HEADER_LEN as usize];
    let n = read_full(&mut r, &mut header)?;
    if n < 4 || &header[..4] != MAGIC {
        let offset = (0..n.min(4)).find(|&i| header[i] != MAGIC[i]).unwrap_or(n) as u64;
        return Err(Error::MalformedTagFile {
            offset,
            reason: "missing TTAG magic".into(),
        });
    }
    if n < 5 {
        return Err(Error::MalformedTagFile {
            offset: n as u64,
            reason: "truncated header (no version byte)".into(),
        });
    }
    if header[4] != VERSION {
        return Err(Error::MalformedTagFile {
            offset: 4,
            reason: format!("unsupported version {}", header[4]),
        });
    }
    if n < HEADER_LEN as usize {
        return Err(Error::MalformedTagFile {
            offset: n as u64,
            reason: "truncated header (tick resolution)".into(),
        });
    }
    let tick_fs = u64::from_le_bytes(header[5..13].try_into().expect("8 bytes"));
    if tick_fs == 0 {
        return Err(Error::MalformedTagFile {
            offset: 5,
            reason: "tick resolution is zero".into(),
        });
    }

    let mut tags = Vec::new();
    let mut rec = [0u8; RECORD_LEN as usize];
    let mut offset = HEADER_LEN;
    loop {
        let n = read_full(&mut r, &mut rec)?;
        if n == 0 {
            break;
        }
        if n < rec.len() {
            return Err(Error::MalformedTagFile {
                offset,
                reason: format!("truncated record ({n} of {RECORD_LEN} bytes)"),
            });
        }
        let channel = rec[0];
        if channel == 0 {
            return Err(Error::MalformedTagFile {
                offset,
                reason: "channel 0 is not valid".into(),
            });
        }
        let tick = u64::from_le_bytes(rec[1..].try_into().expect("8 bytes"));
        tags.push(TimeTag { tick, channel });
        offset += RECORD_LEN;
    }
    Ok(TagFile { tick_fs, tags })
}

pub fn read_file(path: &Path) -> Result<TagFile> {
    read_from(BufReader::new(File::open(path)?))
}
