//! Minimal 32-bit float WAV (RIFF, little-endian) reader and writer.

use std::fs;
use std::path::Path;

use crate::error::{BridgeError, Result};

const FORMAT_IEEE_FLOAT: u16 = 3;

/// Write samples as a mono 32-bit float WAV file.
pub fn write_wav_f32(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = (samples.len() * 4) as u32;
    let byte_rate = sample_rate * 4;
    let mut bytes = Vec::with_capacity(44 + samples.len() * 4);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // channels
    bytes.extend_from_slice(&sample_rate.to_le_bytes());
    bytes.extend_from_slice(&byte_rate.to_le_bytes());
    bytes.extend_from_slice(&4u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&32u16.to_le_bytes()); // bits per sample
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &v in samples {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a mono 32-bit float WAV file. Unknown chunks are skipped.
pub fn read_wav_f32(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(BridgeError::Wav("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<Vec<f64>> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(BridgeError::Wav("truncated chunk".into()));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(BridgeError::Wav("fmt chunk too small".into()));
                }
                let format = u16::from_le_bytes(bytes[body..body + 2].try_into().unwrap());
                let channels = u16::from_le_bytes(bytes[body + 2..body + 4].try_into().unwrap());
                let bits = u16::from_le_bytes(bytes[body + 14..body + 16].try_into().unwrap());
                if format != FORMAT_IEEE_FLOAT || bits != 32 {
                    return Err(BridgeError::Wav(format!(
                        "unsupported format {format}/{bits}-bit (need IEEE float 32)"
                    )));
                }
                if channels != 1 {
                    return Err(BridgeError::Wav(format!("expected mono, got {channels} channels")));
                }
                sample_rate =
                    Some(u32::from_le_bytes(bytes[body + 4..body + 8].try_into().unwrap()));
            }
            b"data" => {
                let mut samples = Vec::with_capacity(size / 4);
                for chunk in bytes[body..body + size].chunks_exact(4) {
                    samples.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
                }
                data = Some(samples);
            }
            _ => {}
        }
        pos = body + size + (size & 1); // chunks are word-aligned
    }
    match (data, sample_rate) {
        (Some(samples), Some(rate)) => Ok((samples, rate)),
        _ => Err(BridgeError::Wav("missing fmt or data chunk".into())),
    }
}
