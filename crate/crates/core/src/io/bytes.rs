//! Little-endian byte cursors with a CRC32 trailer.

use crate::{Error, Result};

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    /// String with a u16 length prefix.
    pub fn str16(&mut self, s: &str) {
        let b = s.as_bytes();
        assert!(b.len() <= u16::MAX as usize, "string too long for a u16 length prefix");
        self.u16(b.len() as u16);
        self.bytes(b);
    }

    /// String with a u32 length prefix.
    pub fn str32(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    /// Appends the CRC32 of everything written so far.
    pub fn finish_with_crc(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn truncated(&self) -> Error {
        Error::Truncated { what: self.what }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Fails with a truncation error unless `n` more bytes are available
    /// (the CRC trailer excluded).
    pub fn ensure(&self, n: usize) -> Result<()> {
        if self.remaining() < n.saturating_add(4) {
            return Err(self.truncated());
        }
        Ok(())
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.truncated());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        if self.take(4)? != expected {
            return Err(Error::BadMagic { what: self.what, expected });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A u64 count that must fit in memory-addressable range.
    pub fn len_u64(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.truncated())
    }

    pub fn str16(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        self.utf8(n)
    }

    pub fn str32(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        self.utf8(n)
    }

    fn utf8(&mut self, n: usize) -> Result<String> {
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Data(format!("{}: invalid utf-8 string", self.what)))
    }

    /// Peeks whether exactly the CRC trailer is left.
    pub fn at_trailer(&self) -> bool {
        self.remaining() == 4
    }

    /// Verifies that exactly the CRC trailer remains and matches.
    pub fn finish_crc(&mut self) -> Result<()> {
        let body_end = self.pos;
        match self.remaining() {
            r if r < 4 => return Err(self.truncated()),
            4 => {}
            _ => return Err(Error::Data(format!("{}: unexpected bytes before the checksum", self.what))),
        }
        let stored = self.u32()?;
        let computed = crc32fast::hash(&self.buf[..body_end]);
        if stored != computed {
            return Err(Error::Checksum {
                what: self.what,
                stored,
                computed,
            });
        }
        Ok(())
    }
}

/// Checks the trailing CRC32 of a whole buffer without parsing it.
pub fn verify_crc(buf: &[u8], what: &'static str) -> Result<()> {
    if buf.len() < 4 {
        return Err(Error::Truncated { what });
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { what, stored, computed });
    }
    Ok(())
}
