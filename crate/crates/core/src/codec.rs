//! Length-prefixed big-endian binary encoding.

use crate::field::{FieldElement, Modulus};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("truncated input at byte {0}")]
    Truncated(usize),
    #[error("invalid encoding: {0}")]
    Invalid(String),
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn len_prefix(&mut self, n: usize) -> &mut Self {
        self.u32(n as u32)
    }

    pub fn fe(&mut self, v: &FieldElement) -> &mut Self {
        self.buf.extend_from_slice(&v.to_bytes_be());
        self
    }

    pub fn fes(&mut self, v: &[FieldElement]) -> &mut Self {
        self.len_prefix(v.len());
        for x in v {
            self.fe(x);
        }
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.len_prefix(b.len());
        self.buf.extend_from_slice(b);
        self
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn len_prefix(&mut self) -> Result<usize, CodecError> {
        Ok(self.u32()? as usize)
    }

    pub fn fe(&mut self, m: &Modulus) -> Result<FieldElement, CodecError> {
        let bytes = self.take(m.byte_len())?;
        m.from_bytes_be(bytes).map_err(|e| CodecError::Invalid(e.to_string()))
    }

    pub fn fes(&mut self, m: &Modulus) -> Result<Vec<FieldElement>, CodecError> {
        let n = self.len_prefix()?;
        (0..n).map(|_| self.fe(m)).collect()
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.len_prefix()?;
        self.take(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = Modulus::new_u64(101).unwrap();
        let mut w = Writer::new();
        w.u8(7)
            .u32(70000)
            .f64(-1.5)
            .fes(&[m.from_u64(3), m.from_u64(100)])
            .bytes(b"xy");
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u32().unwrap(), 70000);
        assert_eq!(r.f64().unwrap(), -1.5);
        assert_eq!(r.fes(&m).unwrap(), vec![m.from_u64(3), m.from_u64(100)]);
        assert_eq!(r.bytes().unwrap(), b"xy");
        assert!(r.is_done());
        assert_eq!(Reader::new(&bytes[..3]).u32(), Err(CodecError::Truncated(0)));
        assert!(Reader::new(&[200]).fe(&m).is_err());
    }
}
