//! Minimal RIFF/WAVE codec: reads PCM 16-bit and IEEE float 32-bit, mono or
//! stereo (down-mixed by channel mean); writes PCM 16-bit mono.

use std::fs;
use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug)]
struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8], offset: usize) -> Result<Format> {
    if body.len() < 16 {
        return Err(Error::integrity(offset as u64, "fmt chunk shorter than 16 bytes"));
    }
    let mut tag = u16_at(body, 0);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(Error::integrity(offset as u64, "extensible fmt chunk shorter than 40 bytes"));
        }
        // first two bytes of the sub-format GUID carry the real format tag
        tag = u16_at(body, 24);
    }
    Ok(Format {
        tag,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits: u16_at(body, 14),
    })
}

/// Decodes a WAV byte buffer into mono samples in `[-1, 1]` and its sample rate.
pub fn decode_wav(bytes: &[u8]) -> Result<(Vec<f32>, u32)> {
    if bytes.len() < 12 {
        return Err(Error::integrity(bytes.len() as u64, "file shorter than a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    let mut format: Option<Format> = None;
    let mut offset = 12usize;
    loop {
        if offset + 8 > bytes.len() {
            return Err(Error::integrity(offset as u64, "truncated before the data chunk"));
        }
        let id = &bytes[offset..offset + 4];
        let size = u32_at(bytes, offset + 4) as usize;
        let body_start = offset + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = body_end.ok_or_else(|| Error::integrity(body_start as u64, "truncated fmt chunk"))?;
                format = Some(parse_fmt(&bytes[body_start..end], body_start)?);
            }
            b"data" => {
                let fmt = format.ok_or_else(|| Error::Format("data chunk precedes the fmt chunk".into()))?;
                let end = body_end.ok_or_else(|| {
                    Error::integrity(
                        bytes.len() as u64,
                        format!("data chunk declares {size} bytes, only {} present", bytes.len() - body_start),
                    )
                })?;
                return decode_samples(&bytes[body_start..end], fmt, body_start);
            }
            _ => {
                if body_end.is_none() {
                    return Err(Error::integrity(
                        body_start as u64,
                        format!("truncated `{}` chunk", String::from_utf8_lossy(id)),
                    ));
                }
            }
        }
        offset = body_start + size + (size & 1);
    }
}

fn decode_samples(data: &[u8], fmt: Format, offset: usize) -> Result<(Vec<f32>, u32)> {
    let bytes_per_sample = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(Error::Format(format!(
                "fmt chunk: unsupported encoding (format tag {tag}, {bits} bits); expected 16-bit PCM or 32-bit float"
            )))
        }
    };
    if !(1..=2).contains(&fmt.channels) {
        return Err(Error::Format(format!(
            "fmt chunk: {} channels unsupported; expected mono or stereo",
            fmt.channels
        )));
    }
    let channels = usize::from(fmt.channels);
    let frame = bytes_per_sample * channels;
    if usize::from(fmt.block_align) != frame {
        return Err(Error::Format(format!(
            "fmt chunk: block align {} does not match {channels} channel(s) of {} bits",
            fmt.block_align, fmt.bits
        )));
    }
    if data.len() % frame != 0 {
        return Err(Error::integrity(
            (offset + data.len()) as u64,
            format!("data chunk length {} is not a whole number of {frame}-byte frames", data.len()),
        ));
    }
    let sample = |chunk: &[u8]| -> f32 {
        if bytes_per_sample == 2 {
            f32::from(i16::from_le_bytes([chunk[0], chunk[1]])) / 32768.0
        } else {
            f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]])
        }
    };
    let samples = data
        .chunks_exact(frame)
        .map(|f| {
            if channels == 1 {
                sample(f)
            } else {
                (sample(&f[..bytes_per_sample]) + sample(&f[bytes_per_sample..])) * 0.5
            }
        })
        .collect();
    Ok((samples, fmt.sample_rate))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f32>, u32)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Integrity { offset, reason } => Error::Integrity {
            offset,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

/// Quantises to 16-bit PCM after clamping to `[-1, 1]`.
pub fn quantize(sample: f32) -> i16 {
    let scaled = (sample.clamp(-1.0, 1.0) * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(samples: &[f32], sample_rate: u32) -> Result<Vec<u8>> {
    if let Some(bad) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::shape(format!("sample {bad} is not finite")));
    }
    let data_len = u32::try_from(samples.len() * 2)
        .map_err(|_| Error::shape("waveform too long for a WAV file"))?;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    Ok(out)
}

/// Writes a 16-bit mono file. The file appears only once fully written.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    atomic_write(path.as_ref(), &encode_wav(samples, sample_rate)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tag: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&(16000 * u32::from(block)).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    fn pcm16(samples: &[i16]) -> Vec<u8> {
        samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    #[test]
    fn int16_scaling() {
        let (x, sr) = decode_wav(&header(1, 1, 16, &pcm16(&[32767, -32768, 0]))).unwrap();
        assert_eq!(sr, 16000);
        assert_eq!(x[0], 32767.0 / 32768.0);
        assert_eq!(x[1], -1.0);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let data: Vec<u8> = [0.5f32, -0.5, 0.25, 0.75].iter().flat_map(|v| v.to_le_bytes()).collect();
        let (x, _) = decode_wav(&header(3, 2, 32, &data)).unwrap();
        assert_eq!(x, vec![0.0, 0.5]);
    }

    #[test]
    fn unsupported_depth_names_fmt_chunk() {
        let err = decode_wav(&header(1, 1, 24, &[0; 6])).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("fmt chunk")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_data_is_integrity_error() {
        let mut bytes = header(1, 1, 16, &pcm16(&[1, 2, 3, 4]));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_wav(&bytes), Err(Error::Integrity { .. })));
        assert!(matches!(decode_wav(&bytes[..20]), Err(Error::Integrity { .. })));
    }

    #[test]
    fn clamp_and_empty() {
        assert_eq!(quantize(1.5), 32767);
        assert_eq!(quantize(-3.0), -32768);
        let bytes = encode_wav(&[], 16000).unwrap();
        assert_eq!(bytes.len(), 44);
        let (x, sr) = decode_wav(&bytes).unwrap();
        assert!(x.is_empty());
        assert_eq!(sr, 16000);
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = header(1, 1, 16, &pcm16(&[100]));
        // splice a LIST chunk with odd length (padded) before data
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), &[1, 2, 3, 0]].concat();
        bytes.splice(36..36, list);
        let (x, _) = decode_wav(&bytes).unwrap();
        assert_eq!(x, vec![100.0 / 32768.0]);
    }
}
