//! Versioned binary checkpoints: ψ, α, t and the Langevin RNG position.
//!
//! Layout (little endian): magic `CDTCCKPT`, u32 version, u64 n, f64 t,
//! f64 Re α, f64 Im α, n × (f64 Re ψ, f64 Im ψ), 32-byte RNG seed,
//! u64 stream, u128 word position.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::CField;

const MAGIC: &[u8; 8] = b"CDTCCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: CField,
    pub rng: RngState,
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(ck.state.psi.len() as u64).to_le_bytes())?;
    w.write_all(&ck.state.time.to_le_bytes())?;
    w.write_all(&ck.state.alpha.re.to_le_bytes())?;
    w.write_all(&ck.state.alpha.im.to_le_bytes())?;
    for p in &ck.state.psi {
        w.write_all(&p.re.to_le_bytes())?;
        w.write_all(&p.im.to_le_bytes())?;
    }
    w.write_all(&ck.rng.seed)?;
    w.write_all(&ck.rng.stream.to_le_bytes())?;
    w.write_all(&ck.rng.word_pos.to_le_bytes())?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array::<8, _>(r)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let magic = read_array::<8, _>(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array::<4, _>(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let n = u64::from_le_bytes(read_array::<8, _>(&mut r)?) as usize;
    if n > (1 << 28) {
        return Err(Error::Checkpoint(format!("implausible grid size {n}")));
    }
    let time = read_f64(&mut r)?;
    let alpha = Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?);
    let mut psi = Vec::with_capacity(n);
    for _ in 0..n {
        psi.push(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?));
    }
    let seed = read_array::<32, _>(&mut r)?;
    let stream = u64::from_le_bytes(read_array::<8, _>(&mut r)?);
    let word_pos = u128::from_le_bytes(read_array::<16, _>(&mut r)?);
    Ok(Checkpoint {
        state: CField { psi, alpha, time },
        rng: RngState {
            seed,
            stream,
            word_pos,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::noise::{trajectory_rng, STREAM_LANGEVIN};
    use rand::Rng;

    fn sample() -> Checkpoint {
        let mut rng = trajectory_rng(3, STREAM_LANGEVIN);
        let _: f64 = rng.gen();
        let psi = (0..8).map(|j| Complex64::new(j as f64 * 0.1, -1.0 / (j as f64 + 1.0))).collect();
        Checkpoint {
            state: CField {
                psi,
                alpha: Complex64::new(f64::MIN_POSITIVE, -3.5e300),
                time: 12.75,
            },
            rng: RngState::capture(&rng),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &ck).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 24 + 8 * 16 + 32 + 8 + 16);
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
        let (mut a, mut b) = (ck.rng.restore(), back.rng.restore());
        for _ in 0..10 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn rejects_foreign_and_damaged_files() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &sample()).unwrap();

        let mut wrong_version = bytes.clone();
        wrong_version[8] = 99;
        assert!(matches!(read_checkpoint(wrong_version.as_slice()), Err(Error::Checkpoint(_))));

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(read_checkpoint(wrong_magic.as_slice()), Err(Error::Checkpoint(_))));

        let truncated = &bytes[..bytes.len() - 5];
        assert!(matches!(read_checkpoint(truncated), Err(Error::Checkpoint(_))));
    }
}
