//! Signal-processing primitives: band-pass FIR filtering, short-time Fourier
//! analysis and mel-cepstral coefficients.

mod fir;
mod mfcc;
mod signal;
mod stft;
pub mod window;

pub use fir::{bandpass, kaiser_beta, kaiser_transition_hz, FirFilter, DEFAULT_TAPS, STOPBAND_DESIGN_DB};
pub use mfcc::{dct2_matrix, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, FrameSpectra, MfccConfig, MfccExtractor};
pub use signal::Signal;
pub use stft::{istft, stft, stft_complex, ComplexStft, Spectrogram, Window};

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}
