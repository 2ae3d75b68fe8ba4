//! Model checkpoint layout, little-endian throughout:
//!
//! ```text
//! "GPNN" | version u16
//! dims u16 | per axis: min f64, max f64, points u32
//! channels u32 | kernel u32 | dilation count u16, dilations u32 × n
//! output channels u16 | leaky slope f64 | seed u64 | input range f64 × 2
//! batchnorm eps f64 | momentum f64 | statistics initialized u8
//! layer count u16 | per layer: kind u8, rank u8, shape u32 × rank, dilation u32, params u64
//! value count u64 | values f64 × n (trainable parameters, then running statistics)
//! CRC32 u32 over everything before it
//! ```

use std::fs;
use std::path::Path;

use gpstate_core::grid::Axis;

use crate::error::{Error, Result};
use crate::model::{GroundStateNet, LayerKind, LayerSpec, NetConfig};

pub const MAGIC: &[u8; 4] = b"GPNN";
pub const VERSION: u16 = 1;

pub fn write_checkpoint(net: &GroundStateNet) -> Vec<u8> {
    let cfg = net.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.axes.len() as u16).to_le_bytes());
    for a in &cfg.axes {
        out.extend_from_slice(&a.min.to_le_bytes());
        out.extend_from_slice(&a.max.to_le_bytes());
        out.extend_from_slice(&(a.points as u32).to_le_bytes());
    }
    out.extend_from_slice(&(cfg.channels as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.kernel as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.dilations.len() as u16).to_le_bytes());
    for d in &cfg.dilations {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(cfg.output_channels as u16).to_le_bytes());
    out.extend_from_slice(&cfg.leaky_slope.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&cfg.input_range.0.to_le_bytes());
    out.extend_from_slice(&cfg.input_range.1.to_le_bytes());
    out.extend_from_slice(&cfg.bn_eps.to_le_bytes());
    out.extend_from_slice(&cfg.bn_momentum.to_le_bytes());
    out.push(net.is_initialized() as u8);
    let manifest = net.manifest();
    out.extend_from_slice(&(manifest.len() as u16).to_le_bytes());
    for l in &manifest {
        out.push(l.kind.code());
        out.push(l.shape.len() as u8);
        for s in &l.shape {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(l.dilation as u32).to_le_bytes());
        out.extend_from_slice(&(l.params as u64).to_le_bytes());
    }
    let state = net.state();
    out.extend_from_slice(&(state.len() as u64).to_le_bytes());
    for v in state {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn save_checkpoint(net: &GroundStateNet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GroundStateNet> {
    read_checkpoint(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        self.pos += n;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<usize> {
        Ok(u16::from_le_bytes(self.array()?) as usize)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<GroundStateNet> {
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a GPNN file".into()));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
        return Err(Error::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dims = r.u16()?;
    let mut axes = Vec::with_capacity(dims);
    for _ in 0..dims {
        let (min, max, points) = (r.f64()?, r.f64()?, r.u32()?);
        axes.push(Axis::new(min, max, points)?);
    }
    let channels = r.u32()?;
    let kernel = r.u32()?;
    let n_dil = r.u16()?;
    let dilations = (0..n_dil).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let config = NetConfig {
        axes,
        channels,
        kernel,
        dilations,
        output_channels: r.u16()?,
        leaky_slope: r.f64()?,
        seed: r.u64()?,
        input_range: (r.f64()?, r.f64()?),
        bn_eps: r.f64()?,
        bn_momentum: r.f64()?,
    };
    let initialized = r.u8()? != 0;
    let layers = r.u16()?;
    let mut manifest = Vec::with_capacity(layers);
    for _ in 0..layers {
        let kind = LayerKind::from_code(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown layer kind".into()))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        manifest.push(LayerSpec {
            kind,
            shape,
            dilation: r.u32()?,
            params: r.u64()? as usize,
        });
    }
    let mut net = GroundStateNet::new(config)?;
    if net.manifest() != manifest {
        return Err(Error::Checkpoint("layer manifest does not match the stored configuration".into()));
    }
    let count = r.u64()? as usize;
    if count != net.state_len() || r.pos + count * 8 != body.len() {
        return Err(Error::Checkpoint(format!(
            "{count} stored values, network expects {}",
            net.state_len()
        )));
    }
    let values: Vec<f64> = r
        .take(count * 8)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    net.load_state(&values, initialized)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpstate_core::grid::Grid;

    fn trained_net() -> GroundStateNet {
        let grid = Grid::line(-4.0, 4.0, 16).unwrap();
        let mut cfg = NetConfig::for_grid(&grid, 2, (-20.0, 0.0));
        cfg.channels = 4;
        let mut net = GroundStateNet::new(cfg).unwrap();
        net.forward(&[-1.0, -5.0, -12.0]).unwrap();
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = trained_net();
        let bytes = write_checkpoint(&net);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back.config(), net.config());
        assert_eq!(write_checkpoint(&back), bytes);
        assert_eq!(back.predict(&[-3.3]).unwrap(), net.predict(&[-3.3]).unwrap());
    }

    #[test]
    fn untrained_statistics_survive() {
        let grid = Grid::line(-4.0, 4.0, 8).unwrap();
        let net = GroundStateNet::new(NetConfig::for_grid(&grid, 1, (0.0, 1.0))).unwrap();
        let back = read_checkpoint(&write_checkpoint(&net)).unwrap();
        assert!(!back.is_initialized());
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = write_checkpoint(&trained_net());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(read_checkpoint(&bytes), Err(Error::Checksum)));
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint(b"GPNN").is_err());
    }
}
