//! Self-describing checkpoint container.
//!
//! Layout (little-endian throughout):
//!   magic "TCAR", format version u32, rng seed u64, entry count u32,
//!   then per entry: name (u16 length + UTF-8), dtype tag u8
//!   (1 = f64, 2 = bytes), rank u8, dims u32 each, payload.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"TCAR";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes; not a checkpoint archive")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("entry name is not valid UTF-8")]
    BadName,
    #[error("duplicate entry name {0:?}")]
    DuplicateEntry(String),
    #[error("missing entry {0:?}")]
    MissingEntry(String),
    #[error("entry {name:?} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryData {
    F64 { shape: Vec<usize>, values: Vec<f64> },
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    pub data: EntryData,
}

/// In-memory archive; write/read round-trips bit-exactly.
#[derive(Debug, Clone)]
pub struct Archive {
    pub version: u32,
    pub seed: u64,
    pub entries: Vec<Entry>,
}

impl Archive {
    pub fn new(seed: u64) -> Self {
        Archive {
            version: ARCHIVE_VERSION,
            seed,
            entries: Vec::new(),
        }
    }

    pub fn push_f64(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<(), ArchiveError> {
        self.check_free(name)?;
        self.entries.push(Entry {
            name: name.to_string(),
            data: EntryData::F64 { shape, values },
        });
        Ok(())
    }

    pub fn push_bytes(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), ArchiveError> {
        self.check_free(name)?;
        self.entries.push(Entry {
            name: name.to_string(),
            data: EntryData::Bytes(bytes),
        });
        Ok(())
    }

    fn check_free(&self, name: &str) -> Result<(), ArchiveError> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(ArchiveError::DuplicateEntry(name.to_string()));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn f64_entry(&self, name: &str) -> Result<(&[usize], &[f64]), ArchiveError> {
        match self.get(name) {
            Some(Entry {
                data: EntryData::F64 { shape, values },
                ..
            }) => Ok((shape, values)),
            _ => Err(ArchiveError::MissingEntry(name.to_string())),
        }
    }

    pub fn bytes_entry(&self, name: &str) -> Result<&[u8], ArchiveError> {
        match self.get(name) {
            Some(Entry {
                data: EntryData::Bytes(b),
                ..
            }) => Ok(b),
            _ => Err(ArchiveError::MissingEntry(name.to_string())),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ArchiveError> {
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_u32::<LittleEndian>(self.version)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for entry in &self.entries {
            let name = entry.name.as_bytes();
            w.write_u16::<LittleEndian>(name.len() as u16)?;
            w.write_all(name)?;
            match &entry.data {
                EntryData::F64 { shape, values } => {
                    w.write_u8(1)?;
                    w.write_u8(shape.len() as u8)?;
                    for &d in shape {
                        w.write_u32::<LittleEndian>(d as u32)?;
                    }
                    for &v in values {
                        w.write_f64::<LittleEndian>(v)?;
                    }
                }
                EntryData::Bytes(bytes) => {
                    w.write_u8(2)?;
                    w.write_u8(1)?;
                    w.write_u32::<LittleEndian>(bytes.len() as u32)?;
                    w.write_all(bytes)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ArchiveError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != ARCHIVE_MAGIC {
            return Err(ArchiveError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != ARCHIVE_VERSION {
            return Err(ArchiveError::UnsupportedVersion(version));
        }
        let seed = r.read_u64::<LittleEndian>()?;
        let count = r.read_u32::<LittleEndian>()?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = r.read_u16::<LittleEndian>()? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)?;
            let name = String::from_utf8(name_bytes).map_err(|_| ArchiveError::BadName)?;
            let dtype = r.read_u8()?;
            let rank = r.read_u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32::<LittleEndian>()? as usize);
            }
            let numel: usize = shape.iter().product();
            let data = match dtype {
                1 => {
                    let mut values = vec![0.0; numel];
                    r.read_f64_into::<LittleEndian>(&mut values)?;
                    EntryData::F64 { shape, values }
                }
                2 => {
                    let mut bytes = vec![0u8; numel];
                    r.read_exact(&mut bytes)?;
                    EntryData::Bytes(bytes)
                }
                other => return Err(ArchiveError::UnknownDtype(other)),
            };
            entries.push(Entry { name, data });
        }
        Ok(Archive {
            version,
            seed,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ArchiveError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_entries() {
        let mut a = Archive::new(42);
        a.push_f64("w", vec![2, 3], vec![1.0, -2.5, 3.0, 0.0, 1e-300, 7.0])
            .unwrap();
        a.push_bytes("manifest.json", b"{\"k\":1}".to_vec()).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let b = Archive::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(b.seed, 42);
        assert_eq!(b.version, ARCHIVE_VERSION);
        let (shape, values) = b.f64_entry("w").unwrap();
        assert_eq!(shape, &[2, 3]);
        assert_eq!(values, a.f64_entry("w").unwrap().1);
        assert_eq!(b.bytes_entry("manifest.json").unwrap(), b"{\"k\":1}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut a = Archive::new(0);
        a.push_f64("w", vec![1], vec![0.0]).unwrap();
        assert!(matches!(
            a.push_f64("w", vec![1], vec![0.0]),
            Err(ArchiveError::DuplicateEntry(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPEated".to_vec();
        assert!(matches!(
            Archive::read_from(&mut buf.as_slice()),
            Err(ArchiveError::BadMagic)
        ));
    }
}
