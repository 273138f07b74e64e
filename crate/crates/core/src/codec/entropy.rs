use super::bits::{BitReader, BitWriter};
use super::dct::{zigzag, N};
use crate::error::{Error, Result};

/// Entropy stage for quantized 8x8 coefficient blocks (raster order).
pub trait ResidualCoder: Sync {
    fn write(&self, w: &mut BitWriter, levels: &[i32; N * N]);
    fn read(&self, r: &mut BitReader<'_>) -> Result<[i32; N * N]>;
}

/// Zigzag scan, then `ue(count)` followed by `ue(zero run) se(level)` pairs.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunLengthExpGolomb;

impl ResidualCoder for RunLengthExpGolomb {
    fn write(&self, w: &mut BitWriter, levels: &[i32; N * N]) {
        let scan = zigzag();
        let count = scan.iter().filter(|&&i| levels[i] != 0).count();
        w.put_ue(count as u32);
        let mut run = 0;
        for &i in scan {
            let level = levels[i];
            if level == 0 {
                run += 1;
            } else {
                w.put_ue(run);
                w.put_se(level);
                run = 0;
            }
        }
    }

    fn read(&self, r: &mut BitReader<'_>) -> Result<[i32; N * N]> {
        let scan = zigzag();
        let count = r.ue()? as usize;
        if count > N * N {
            return Err(Error::MalformedPayload(format!("{count} coefficients in a block")));
        }
        let mut levels = [0; N * N];
        let mut at = 0usize;
        for _ in 0..count {
            at += r.ue()? as usize;
            if at >= N * N {
                return Err(Error::MalformedPayload("coefficient run past block end".into()));
            }
            let level = r.se()?;
            if level == 0 {
                return Err(Error::MalformedPayload("zero level coded".into()));
            }
            levels[scan[at]] = level;
            at += 1;
        }
        Ok(levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_block_round_trip() {
        let mut levels = [0; 64];
        levels[0] = 12;
        levels[9] = -3;
        levels[63] = 1;
        let mut w = BitWriter::new();
        RunLengthExpGolomb.write(&mut w, &levels);
        let bytes = w.finish();
        let got = RunLengthExpGolomb.read(&mut BitReader::new(&bytes)).unwrap();
        assert_eq!(got, levels);
    }

    #[test]
    fn empty_block_costs_one_bit() {
        let mut w = BitWriter::new();
        RunLengthExpGolomb.write(&mut w, &[0; 64]);
        assert_eq!(w.bit_len(), 1);
    }
}
