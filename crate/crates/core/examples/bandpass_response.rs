//! Frequency response of the default linear-phase bandpass and what it does to
//! an out-of-band tone.
//!
//! ```text
//! cargo run --release --example bandpass_response
//! ```

use vibroaudit::dsp::{kaiser_transition_hz, FirFilter, DEFAULT_TAPS};

fn main() -> vibroaudit::Result<()> {
    let fs = 100_000.0;
    let f = FirFilter::bandpass(250.0, 10_000.0, fs, DEFAULT_TAPS)?;
    println!("{} taps, cutoffs {:?}", f.taps().len(), f.cutoffs());
    println!("transition width for 60 dB: {:.0} Hz", kaiser_transition_hz(60.0, DEFAULT_TAPS, fs));
    for hz in [100.0, 200.0, 250.0, 500.0, 1_000.0, 5_000.0, 10_000.0, 12_000.0, 20_000.0, 33_000.0] {
        println!("{hz:>8.0} Hz  {:>8.2} dB", f.response_db(hz));
    }

    let n = 20_000;
    let tone: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 33_000.0 * i as f64 / fs).sin()).collect();
    let out = f.apply(&tone);
    let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let mid = n / 4..3 * n / 4;
    println!("33 kHz tone rms {:.3} -> {:.2e} after filtering", rms(&tone[mid.clone()]), rms(&out[mid]));
    Ok(())
}
