//! Audio feature extraction and predominant-instrument classification.
//!
//! The crate covers the whole offline pipeline: WAV decoding
//! ([`audio_io`]), short-time Fourier analysis ([`spectral`]), MFCC and
//! spectral descriptors ([`features`]), dataset handling ([`dataset`]),
//! six supervised learners ([`learn`]), clustering ([`cluster`]) and
//! evaluation metrics ([`eval`]).

pub mod audio_io;
pub mod cluster;
pub mod features;
pub mod spectral;
pub mod dataset;
pub mod eval;
pub mod learn;
pub mod synth;
