//! Binary portable-pixmap output: grayscale spectrograms (P5) and colored
//! confusion-matrix heatmaps (P6).

use timbre_core::eval::ConfusionMatrix;
use timbre_core::spectral::PowerSpectrogram;

/// 8-bit grayscale image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// 8-bit RGB image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }
}

/// `10 log10(power + floor)`, min–max scaled to 0..=255. One column per frame;
/// the lowest frequency bin is the bottom row. A constant spectrogram maps
/// to an all-zero image.
pub fn spectrogram_image(spec: &PowerSpectrogram, floor: f64) -> GrayImage {
    let (width, height) = (spec.n_frames(), spec.n_bins());
    let db: Vec<Vec<f64>> = spec
        .values
        .iter()
        .map(|frame| frame.iter().map(|p| 10.0 * (p + floor).log10()).collect())
        .collect();
    let (lo, hi) = db
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut pixels = vec![0u8; width * height];
    for (x, frame) in db.iter().enumerate() {
        for (bin, &v) in frame.iter().enumerate() {
            let level = if range > 0.0 { ((v - lo) / range * 255.0).round() } else { 0.0 };
            pixels[(height - 1 - bin) * width + x] = level as u8;
        }
    }
    GrayImage { width, height, pixels }
}

/// Side length of one matrix cell in the heatmap.
pub const HEATMAP_CELL: usize = 32;

/// White-to-navy ramp over `t` in `[0, 1]`.
fn ramp(t: f64) -> [u8; 3] {
    const LOW: [f64; 3] = [255.0, 255.0, 255.0];
    const HIGH: [f64; 3] = [8.0, 48.0, 107.0];
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        *out = (LOW[c] + t * (HIGH[c] - LOW[c])).round() as u8;
    }
    rgb
}

/// Each cell's color encodes its count relative to the largest count; rows
/// are actual classes, columns predicted.
pub fn confusion_heatmap(cm: &ConfusionMatrix) -> RgbImage {
    let k = cm.n_classes();
    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let side = k * HEATMAP_CELL;
    let mut pixels = vec![[0u8; 3]; side * side];
    for y in 0..side {
        for x in 0..side {
            let count = cm.counts[y / HEATMAP_CELL][x / HEATMAP_CELL] as f64;
            pixels[y * side + x] = ramp(count / max);
        }
    }
    RgbImage { width: side, height: side, pixels }
}
