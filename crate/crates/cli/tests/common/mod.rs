//! Fixtures shared by the integration targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use timbre_core::audio_io::{clip_to_pcm, encode_wav};
use timbre_core::dataset::write_feature_csv;
use timbre_core::synth::{gaussian_blobs, tone};

pub const CLIP_SAMPLES: usize = 132_300;

pub fn timbre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timbre"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

pub fn write_tone(path: &Path, freq_hz: f64, amplitude: f64, phase: f64, n_samples: usize) {
    let clip = tone(freq_hz, amplitude, phase, n_samples);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, encode_wav(&clip_to_pcm(&clip))).unwrap();
}

/// Folders `flu`, `pia`, `tru` of 3 s tones, each class in its own band.
pub fn tone_tree(root: &Path, per_class: usize) -> Vec<(String, f64)> {
    let bands = [("flu", 2000.0), ("pia", 220.0), ("tru", 700.0)];
    let mut clips = Vec::new();
    for (code, base) in bands {
        for i in 0..per_class {
            let freq = base * (1.0 + 0.03 * i as f64);
            let name = format!("{code}/{code}_{i:02}.wav");
            write_tone(&root.join(&name), freq, 0.3 + 0.05 * i as f64, 0.1 * i as f64, CLIP_SAMPLES);
            clips.push((name, freq));
        }
    }
    clips
}

/// Six separated 17-D Gaussian blobs written as a feature table.
pub fn blob_csv(path: &Path, n: usize, seed: u64) -> PathBuf {
    let ds = gaussian_blobs(n, 6, 17, 1.0, seed);
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &ds, &[]).unwrap();
    std::fs::write(path, buf).unwrap();
    path.to_path_buf()
}
