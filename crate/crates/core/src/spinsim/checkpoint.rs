//! Binary state snapshot: u64 LE spin count, u64 LE amplitude count, then
//! (re, im) pairs as f64 LE.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::state::SpinState;
use crate::error::{Error, Result};

const HEADER: usize = 16;

pub fn encode_checkpoint(state: &SpinState) -> Vec<u8> {
    let amps = state.amplitudes();
    let mut out = Vec::with_capacity(HEADER + 16 * amps.len());
    out.extend_from_slice(&(state.n() as u64).to_le_bytes());
    out.extend_from_slice(&(amps.len() as u64).to_le_bytes());
    for a in amps {
        out.extend_from_slice(&a.re.to_le_bytes());
        out.extend_from_slice(&a.im.to_le_bytes());
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&bytes[at..at + 8]);
    u64::from_le_bytes(buf)
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_bits(read_u64(bytes, at))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SpinState> {
    if bytes.len() < HEADER {
        return Err(Error::Checkpoint(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let n = read_u64(bytes, 0);
    let count = read_u64(bytes, 8);
    if n == 0 || n > 40 {
        return Err(Error::Checkpoint(format!("implausible spin count {n}")));
    }
    if count != 1u64 << n {
        return Err(Error::Checkpoint(format!("{count} amplitudes for {n} spins")));
    }
    let expected = HEADER as u64 + 16 * count;
    if bytes.len() as u64 != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let amps = (0..count as usize)
        .map(|k| {
            let at = HEADER + 16 * k;
            Complex64::new(read_f64(bytes, at), read_f64(bytes, at + 8))
        })
        .collect();
    SpinState::from_amplitudes(n as usize, amps)
}
