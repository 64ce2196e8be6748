use std::fs;
use std::path::Path;

use crate::io::bytes::{Reader, Writer};
use crate::{Error, Result};

use super::{LabeledDataset, Split};

pub const DATASET_MAGIC: [u8; 4] = *b"CSVD";
pub const DATASET_VERSION: u32 = 1;
const WHAT: &str = "dataset file";

pub fn encode_dataset(d: &LabeledDataset) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(&DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.u64(d.len() as u64);
    w.u8(d.dims.len() as u8);
    for &dim in &d.dims {
        w.u64(dim as u64);
    }
    w.u64(d.k() as u64);
    for name in &d.attr_names {
        w.str16(name);
    }
    for &v in &d.x {
        w.f32(v);
    }
    w.bytes(&d.y);
    for &s in &d.split {
        w.u8(s as u8);
    }
    w.finish_with_crc()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<LabeledDataset> {
    let mut r = Reader::new(bytes, WHAT);
    r.magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::UnknownVersion { what: WHAT, version });
    }
    let n = r.len_u64()?;
    let rank = r.u8()? as usize;
    let dims = (0..rank).map(|_| r.len_u64()).collect::<Result<Vec<_>>>()?;
    let k = r.len_u64()?;
    let attr_names = (0..k).map(|_| r.str16()).collect::<Result<Vec<_>>>()?;
    let d: usize = dims.iter().product();
    let x_len = n.checked_mul(d).ok_or(Error::Truncated { what: WHAT })?;
    r.ensure(x_len.saturating_mul(4))?;
    let x = (0..x_len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    let y = r.take(n.checked_mul(k).ok_or(Error::Truncated { what: WHAT })?)?.to_vec();
    let split = r
        .take(n)?
        .iter()
        .map(|&c| Split::from_code(c).ok_or_else(|| Error::Data(format!("bad split tag {c}"))))
        .collect::<Result<Vec<_>>>()?;
    r.finish_crc()?;
    let mut out = LabeledDataset::new(dims, x, y, attr_names)?;
    out.split = split;
    Ok(out)
}

pub fn save_dataset(d: &LabeledDataset, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(d))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_dataset(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_swiss_roll;

    #[test]
    fn header_of_swiss_roll() {
        let d = make_swiss_roll(10, 0.0, 0).unwrap();
        let b = encode_dataset(&d);
        assert_eq!(&b[..4], b"CSVD");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 10);
        assert_eq!(b[16], 1);
        assert_eq!(u64::from_le_bytes(b[17..25].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[25..33].try_into().unwrap()), 1);
    }

    #[test]
    fn round_trip_and_distinct_errors() {
        let d = make_swiss_roll(25, 0.2, 3).unwrap();
        let b = encode_dataset(&d);
        let back = decode_dataset(&b).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode_dataset(&back), b);

        assert!(matches!(decode_dataset(&b[..b.len() - 3]), Err(Error::Truncated { .. })));
        assert!(matches!(decode_dataset(&b[..2]), Err(Error::Truncated { .. })));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(Error::BadMagic { .. })));
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(matches!(decode_dataset(&bad), Err(Error::UnknownVersion { version: 9, .. })));
        let mut bad = b.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(decode_dataset(&bad), Err(Error::Checksum { .. })));
    }
}
