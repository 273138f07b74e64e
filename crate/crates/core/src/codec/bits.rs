//! MSB-first bit I/O with Exp-Golomb codes.

use crate::error::{Error, Result};

#[derive(Default, Debug)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    filled: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.filled = 0;
        }
    }

    pub fn put_bits(&mut self, value: u64, count: u32) {
        for i in (0..count).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    /// Unsigned Exp-Golomb.
    pub fn put_ue(&mut self, value: u32) {
        let v = value as u64 + 1;
        let len = 64 - v.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(v, len);
    }

    /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ...
    pub fn put_se(&mut self, value: i32) {
        let mapped = if value > 0 {
            2 * value as u32 - 1
        } else {
            2 * value.unsigned_abs()
        };
        self.put_ue(mapped);
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + self.filled as usize
    }

    /// Flushes, zero-padding the final byte.
    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.acc <<= 8 - self.filled;
            self.bytes.push(self.acc);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn bit(&mut self) -> Result<bool> {
        let byte = self
            .data
            .get(self.pos / 8)
            .ok_or_else(|| Error::MalformedPayload("unexpected end of payload".into()))?;
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn bits(&mut self, count: u32) -> Result<u64> {
        let mut v = 0;
        for _ in 0..count {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }

    pub fn ue(&mut self) -> Result<u32> {
        let mut zeros = 0;
        while !self.bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(Error::MalformedPayload("Exp-Golomb prefix too long".into()));
            }
        }
        let rest = self.bits(zeros)?;
        let v = (1u64 << zeros) + rest - 1;
        u32::try_from(v).map_err(|_| Error::MalformedPayload("Exp-Golomb value overflow".into()))
    }

    pub fn se(&mut self) -> Result<i32> {
        let m = self.ue()?;
        Ok(if m % 2 == 1 {
            (m / 2 + 1) as i32
        } else {
            -((m / 2) as i32)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_codewords() {
        let mut w = BitWriter::new();
        w.put_ue(0); // 1
        w.put_ue(3); // 00100
        w.put_se(-1); // ue(2) = 011
        assert_eq!(w.bit_len(), 9);
        assert_eq!(w.finish(), vec![0b1001_0001, 0b1000_0000]);
    }

    #[test]
    fn eof_is_malformed() {
        let mut r = BitReader::new(&[0x00]);
        assert!(matches!(r.ue(), Err(Error::MalformedPayload(_))));
    }

    proptest! {
        #[test]
        fn exp_golomb_round_trip(values in prop::collection::vec(any::<i32>().prop_filter("range", |v| v.unsigned_abs() < 1 << 30), 0..50)) {
            let mut w = BitWriter::new();
            for &v in &values {
                w.put_se(v);
                w.put_ue(v.unsigned_abs());
            }
            let bytes = w.finish();
            let mut r = BitReader::new(&bytes);
            for &v in &values {
                prop_assert_eq!(r.se().unwrap(), v);
                prop_assert_eq!(r.ue().unwrap(), v.unsigned_abs());
            }
        }
    }
}
