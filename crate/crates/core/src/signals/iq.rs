//! Binary IQ dump.
//!
//! Little-endian layout:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `RFIQ`               |
//! | 4      | 4    | format version (u32) = 1   |
//! | 8      | 8    | sample rate, Hz (f64)      |
//! | 16     | 8    | envelope reference, Hz (f64)|
//! | 24     | 8    | sample count (u64)         |
//! | 32     | 8·n  | interleaved I, Q (f32)     |

use std::io::{Read, Write};

use num_complex::Complex;

use super::SampledWaveform;
use crate::error::{contract, Result};
use crate::num::Real;

pub const IQ_MAGIC: &[u8; 4] = b"RFIQ";
pub const IQ_FORMAT_VERSION: u32 = 1;

pub fn write_iq<T: Real, W: Write>(mut out: W, wf: &SampledWaveform<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * wf.len());
    buf.extend_from_slice(IQ_MAGIC);
    buf.extend_from_slice(&IQ_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&wf.sample_rate_hz().to_le_bytes());
    buf.extend_from_slice(&wf.envelope_ref_hz().to_le_bytes());
    buf.extend_from_slice(&(wf.len() as u64).to_le_bytes());
    for s in wf.samples() {
        buf.extend_from_slice(&(s.re.to_f64_lossless() as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im.to_f64_lossless() as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_iq<T: Real, R: Read>(mut input: R) -> Result<SampledWaveform<T>> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[0..4] != IQ_MAGIC {
        return Err(contract("not an RFIQ stream"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != IQ_FORMAT_VERSION {
        return Err(contract(format!("unsupported RFIQ version {version}")));
    }
    let fs = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let fref = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let n = u64::from_le_bytes(header[24..32].try_into().unwrap()) as usize;
    let mut body = vec![0u8; 8 * n];
    input.read_exact(&mut body)?;
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex::new(T::lit(f64::from(re)), T::lit(f64::from(im)))
        })
        .collect();
    SampledWaveform::new(samples, fs, fref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let wf = SampledWaveform::<f64>::new(vec![Complex::new(1.0, -2.0)], 933.0e6, 5e9).unwrap();
        let mut bytes = Vec::new();
        write_iq(&mut bytes, &wf).unwrap();
        assert_eq!(bytes.len(), 40);
        assert_eq!(&bytes[0..4], b"RFIQ");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 5e9);
        assert_eq!(&bytes[24..32], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(f32::from_le_bytes(bytes[36..40].try_into().unwrap()), -2.0);
    }

    #[test]
    fn roundtrip_through_f32() {
        let samples = (0..100)
            .map(|k| Complex::new(k as f64 * 0.5, -(k as f64)))
            .collect();
        let wf = SampledWaveform::<f64>::new(samples, 1e6, 2e9).unwrap();
        let mut bytes = Vec::new();
        write_iq(&mut bytes, &wf).unwrap();
        let back: SampledWaveform<f64> = read_iq(bytes.as_slice()).unwrap();
        assert_eq!(back, wf);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let bytes = [0u8; 40];
        assert!(read_iq::<f64, _>(&bytes[..]).is_err());
    }
}
