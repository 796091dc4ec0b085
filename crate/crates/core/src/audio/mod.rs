//! Sample-level DSP used by scene rendering and feature extraction.

mod buffer;
mod mel;
mod mix;
mod noise;
mod resample;
mod trim;
mod vocoder;
mod wav;

pub use buffer::{amplitude_to_db, db_to_amplitude, rms, AudioBuffer};
pub use mel::{log_mel, mel_filterbank, LogMel, MelConfig};
pub use mix::{gain_for_snr, mix, mix_into, onset_to_offset};
pub use noise::brownian_noise;
pub use resample::{resample, resample_with_step};
pub use trim::trim_silence;
pub use vocoder::{dominant_frequency, pitch_shift, time_stretch, vocoder_hop};
pub use wav::{read_wav, write_wav, write_wav_pcm16};
