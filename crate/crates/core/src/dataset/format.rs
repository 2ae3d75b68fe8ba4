//! Binary dataset layout, little-endian throughout:
//!
//! ```text
//! "GPDS" | version u16 | dims u16 | per axis: min f64, max f64, points u32
//! components u16 | scalar count u16 | parameter count u16 | record count u64
//! per scalar: name length u16, UTF-8 name
//! dt f64 | iteration budget u64 | metadata length u32, UTF-8 metadata
//! header CRC32 u32
//! records: scalars f64 × S | targets f64 × (components · grid points) | CRC32 u32
//! ```
//!
//! The scalars of a record are the swept parameters followed by energy,
//! iterations performed and per-component peak density.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{Dataset, DatasetHeader, SampleRecord};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};

pub const MAGIC: &[u8; 4] = b"GPDS";
pub const VERSION: u16 = 1;

/// Serializes a dataset into bytes.
pub fn write_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    dataset.validate()?;
    let h = &dataset.header;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(h.grid.dims() as u16).to_le_bytes());
    for a in h.grid.axes() {
        out.extend_from_slice(&a.min.to_le_bytes());
        out.extend_from_slice(&a.max.to_le_bytes());
        out.extend_from_slice(&(a.points as u32).to_le_bytes());
    }
    let names = h.scalar_names();
    out.extend_from_slice(&(h.components as u16).to_le_bytes());
    out.extend_from_slice(&(names.len() as u16).to_le_bytes());
    out.extend_from_slice(&(h.parameter_names.len() as u16).to_le_bytes());
    out.extend_from_slice(&(dataset.records.len() as u64).to_le_bytes());
    for n in &names {
        out.extend_from_slice(&(n.len() as u16).to_le_bytes());
        out.extend_from_slice(n.as_bytes());
    }
    out.extend_from_slice(&h.dt.to_le_bytes());
    out.extend_from_slice(&h.iterations.to_le_bytes());
    out.extend_from_slice(&(h.metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(h.metadata.as_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());

    for r in &dataset.records {
        let start = out.len();
        let scalars = r
            .params
            .iter()
            .copied()
            .chain([r.energy, r.iterations as f64])
            .chain(r.peak_density.iter().copied());
        for v in scalars.chain(r.targets.iter().flatten().copied()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_dataset(dataset)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("header truncated at byte {}", self.bytes.len())))?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("header string is not UTF-8".into()))
    }
}

/// Parses and verifies a serialized dataset.
pub fn read_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a GPDS file".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let dims = c.u16()? as usize;
    if !(1..=2).contains(&dims) {
        return Err(Error::Format(format!("unsupported dimensionality {dims}")));
    }
    let mut axes = Vec::with_capacity(dims);
    for _ in 0..dims {
        let (min, max, points) = (c.f64()?, c.f64()?, c.u32()? as usize);
        axes.push(Axis::new(min, max, points).map_err(|e| Error::Format(e.to_string()))?);
    }
    let grid = Arc::new(Grid::new(axes)?);
    let components = c.u16()? as usize;
    let scalar_count = c.u16()? as usize;
    let param_count = c.u16()? as usize;
    let record_count = c.u64()?;
    let mut names = Vec::with_capacity(scalar_count);
    for _ in 0..scalar_count {
        let len = c.u16()? as usize;
        names.push(c.string(len)?);
    }
    let dt = c.f64()?;
    let iterations = c.u64()?;
    let meta_len = c.u32()? as usize;
    let metadata = c.string(meta_len)?;
    let header_end = c.pos;
    let crc = c.u32()?;
    if crc32fast::hash(&bytes[..header_end]) != crc {
        return Err(Error::HeaderChecksum);
    }
    if !(1..=2).contains(&components) || param_count > scalar_count {
        return Err(Error::Format(format!(
            "inconsistent counts: {components} components, {param_count} of {scalar_count} scalars"
        )));
    }
    let header = DatasetHeader {
        grid: grid.clone(),
        components,
        parameter_names: names[..param_count].to_vec(),
        dt,
        iterations,
        metadata,
    };
    if header.scalar_names() != names {
        return Err(Error::Format(format!("unexpected scalar columns {names:?}")));
    }

    let values_per_record = scalar_count + components * grid.len();
    let stride = values_per_record as u64 * 8 + 4;
    let expected = c.pos as u64 + record_count * stride;
    if expected != bytes.len() as u64 {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }

    let mut records = Vec::with_capacity(record_count as usize);
    for index in 0..record_count as usize {
        let start = c.pos;
        let raw = c.take(values_per_record * 8)?;
        let crc = c.u32()?;
        if crc32fast::hash(&bytes[start..start + values_per_record * 8]) != crc {
            return Err(Error::Checksum { index });
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let (scalars, targets) = values.split_at(scalar_count);
        records.push(SampleRecord {
            params: scalars[..param_count].to_vec(),
            energy: scalars[param_count],
            iterations: scalars[param_count + 1] as u64,
            peak_density: scalars[param_count + 2..].to_vec(),
            targets: targets.chunks_exact(grid.len()).map(<[f64]>::to_vec).collect(),
        });
    }
    Ok(Dataset { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(components: usize) -> Dataset {
        let grid = Arc::new(Grid::line(-4.0, 4.0, 8).unwrap());
        let records = (0..12)
            .map(|i| SampleRecord {
                params: vec![i as f64 * 0.5],
                targets: (0..components)
                    .map(|c| (0..8).map(|j| if j == 4 && c == 0 { 1.0 } else { (j as f64 + 0.1 * c as f64) / 9.0 }).collect())
                    .collect(),
                energy: 0.5 + i as f64,
                iterations: 1000 + i as u64,
                peak_density: vec![0.3; components],
            })
            .collect();
        Dataset {
            header: DatasetHeader {
                grid,
                components,
                parameter_names: vec!["g".into()],
                dt: 1e-3,
                iterations: 2000,
                metadata: "components=1\npotential=harmonic\n".into(),
            },
            records,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for c in [1, 2] {
            let d = tiny(c);
            let bytes = write_dataset(&d).unwrap();
            assert_eq!(read_dataset(&bytes).unwrap(), d);
        }
    }

    #[test]
    fn stride_arithmetic() {
        let d = tiny(2);
        let bytes = write_dataset(&d).unwrap();
        // 1 param + energy + iterations + 2 peaks, 2 × 8 targets
        let stride = (5 + 16) * 8 + 4;
        let header = bytes.len() - 12 * stride;
        assert_eq!(&bytes[..4], MAGIC);
        let back = read_dataset(&bytes[..header]);
        assert!(matches!(back, Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn truncated_file_reports_sizes() {
        let bytes = write_dataset(&tiny(1)).unwrap();
        let cut = &bytes[..bytes.len() - 10];
        match read_dataset(cut) {
            Err(Error::SizeMismatch { expected, actual }) => {
                assert_eq!(expected, bytes.len() as u64);
                assert_eq!(actual, cut.len() as u64);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_dataset(&bytes[..20]), Err(Error::Format(_))));
    }

    #[test]
    fn corrupted_record_is_named() {
        let d = tiny(1);
        let mut bytes = write_dataset(&d).unwrap();
        let stride = (4 + 8) * 8 + 4;
        let header = bytes.len() - 12 * stride;
        bytes[header + 7 * stride + 20] ^= 0x40;
        assert!(matches!(read_dataset(&bytes), Err(Error::Checksum { index: 7 })));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = write_dataset(&tiny(1)).unwrap();
        bytes[4] = 9;
        assert!(matches!(read_dataset(&bytes), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(read_dataset(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn invalid_targets_refused_on_write() {
        let mut d = tiny(1);
        d.records[3].targets[0][0] = 1.5;
        assert!(write_dataset(&d).is_err());
    }
}
