use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::Signal;
use crate::error::{Error, Result};

/// Reads a PCM (16/24/32-bit integer) or 32-bit float WAV file.
/// Integer samples are divided by 2^(bits-1); float samples pass through.
pub fn ingest_wav(path: &Path) -> Result<Signal> {
    let fmt_err = |reason: String| Error::WavFormat { path: path.to_path_buf(), reason };
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => Error::io(path, io),
        other => fmt_err(other.to_string()),
    })?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if !(1..=2).contains(&n_ch) {
        return Err(fmt_err(format!("{n_ch} channels, only mono and stereo are supported")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fmt_err(e.to_string()))?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fmt_err(e.to_string()))?
        }
        (fmt, bits) => return Err(fmt_err(format!("unsupported encoding {fmt:?} with {bits} bits"))),
    };
    if !interleaved.len().is_multiple_of(n_ch) {
        return Err(fmt_err("sample count is not a multiple of the channel count".into()));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, v) in channels.iter_mut().zip(frame) {
            c.push(*v);
        }
    }
    Signal::new(channels, f64::from(spec.sample_rate)).map_err(|e| fmt_err(e.to_string()))
}

/// Writes 32-bit float WAV. The sample rate must be an integer number of Hz.
pub fn write_wav_f32(path: &Path, signal: &Signal) -> Result<()> {
    let fs = signal.sample_rate();
    if fs.fract() != 0.0 || fs > f64::from(u32::MAX) {
        return Err(Error::param(format!("sample rate {fs} cannot be stored in a WAV header")));
    }
    let spec = WavSpec {
        channels: signal.n_channels() as u16,
        sample_rate: fs as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::WavFormat { path: path.to_path_buf(), reason: other.to_string() },
    };
    let mut w = WavWriter::create(path, spec).map_err(wrap)?;
    for i in 0..signal.len() {
        for c in signal.channels() {
            w.write_sample(c[i] as f32).map_err(wrap)?;
        }
    }
    w.finalize().map_err(wrap)
}
