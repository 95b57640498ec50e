//! Histogram, sharpness and the exposure advice rule.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Image, PixelFormat};

pub type Histogram = [u64; 256];

/// 256-bin luma histogram.
pub fn histogram(image: &Image) -> Histogram {
    let mut h = [0u64; 256];
    match image.format {
        PixelFormat::Gray8 => image.data.iter().for_each(|&v| h[v as usize] += 1),
        PixelFormat::Rgb8 => {
            for c in image.data.chunks_exact(3) {
                h[super::luma_of([c[0], c[1], c[2]]) as usize] += 1;
            }
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub global_score: f64,
    pub tile_px: u32,
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Row-major tile scores.
    pub tile_scores: Vec<f64>,
    pub exposure_us: f64,
}

/// Mean squared 4-neighbour Laplacian of luma per tile; the global score
/// is the median tile. Border pixels are skipped and edge tiles may be
/// partial.
pub fn sharpness(image: &Image, tile: u32, exposure_us: f64) -> SharpnessReport {
    let (w, h) = (image.width as usize, image.height as usize);
    let tile = tile.max(1);
    let (tx, ty) = (image.width.div_ceil(tile), image.height.div_ceil(tile));
    let luma = image.luma_plane();
    let mut sum = vec![0.0f64; (tx * ty) as usize];
    let mut cnt = vec![0u32; (tx * ty) as usize];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let c = luma[y * w + x] as i32;
            let lap = luma[y * w + x - 1] as i32 + luma[y * w + x + 1] as i32 + luma[(y - 1) * w + x] as i32
                + luma[(y + 1) * w + x] as i32
                - 4 * c;
            let t = (y / tile as usize) * tx as usize + x / tile as usize;
            sum[t] += (lap * lap) as f64;
            cnt[t] += 1;
        }
    }
    let tile_scores: Vec<f64> = sum.iter().zip(&cnt).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect();
    let mut sorted: Vec<f64> = tile_scores.iter().copied().zip(&cnt).filter(|(_, &n)| n > 0).map(|(s, _)| s).collect();
    sorted.sort_by(f64::total_cmp);
    let global_score = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    SharpnessReport { global_score, tile_px: tile, tiles_x: tx, tiles_y: ty, tile_scores, exposure_us }
}

/// Separable box blur of the given radius with edge clamping; a radius-1
/// blur averages a 3-pixel window.
pub fn box_blur(image: &Image, radius: u32) -> Image {
    let (w, h) = (image.width as i64, image.height as i64);
    let ch = image.format.channels();
    let r = radius as i64;
    let n = (2 * r + 1) as u32;
    let idx = |x: i64, y: i64, c: usize| (y as usize * w as usize + x as usize) * ch + c;
    let mut tmp = vec![0u8; image.data.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let s: u32 = (-r..=r).map(|d| image.data[idx((x + d).clamp(0, w - 1), y, c)] as u32).sum();
                tmp[idx(x, y, c)] = ((s + n / 2) / n) as u8;
            }
        }
    }
    let mut out = vec![0u8; image.data.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let s: u32 = (-r..=r).map(|d| tmp[idx(x, (y + d).clamp(0, h - 1), c)] as u32).sum();
                out[idx(x, y, c)] = ((s + n / 2) / n) as u8;
            }
        }
    }
    Image { data: out, ..image.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureAction {
    Lower,
    Raise,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureAdvice {
    pub action: ExposureAction,
    pub suggested_max_exposure_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdviceParams {
    /// Global sharpness below this counts as blurred.
    pub min_sharpness: f64,
    /// Never lower below this.
    pub floor_us: f64,
    pub ceiling_us: f64,
    /// Fraction of pixels in the darkest bins that counts as underexposed.
    pub dark_fraction: f64,
    pub dark_bins: usize,
    /// Multiplicative step for raise and lower.
    pub step: f64,
}

impl Default for AdviceParams {
    fn default() -> Self {
        Self { min_sharpness: 40.0, floor_us: 500.0, ceiling_us: 20_000.0, dark_fraction: 0.2, dark_bins: 8, step: 2.0 }
    }
}

pub fn exposure_advice(
    hist: &Histogram,
    sharp: &SharpnessReport,
    current_max_exposure_us: f64,
    p: &AdviceParams,
) -> ExposureAdvice {
    let total: u64 = hist.iter().sum();
    let dark: u64 = hist[..p.dark_bins.min(256)].iter().sum();
    let dark_frac = if total == 0 { 0.0 } else { dark as f64 / total as f64 };
    let blurred = sharp.global_score < p.min_sharpness;
    let cur = current_max_exposure_us;
    if blurred && cur > p.floor_us {
        ExposureAdvice { action: ExposureAction::Lower, suggested_max_exposure_us: (cur / p.step).max(p.floor_us) }
    } else if !blurred && dark_frac > p.dark_fraction && cur < p.ceiling_us {
        ExposureAdvice { action: ExposureAction::Raise, suggested_max_exposure_us: (cur * p.step).min(p.ceiling_us) }
    } else {
        ExposureAdvice { action: ExposureAction::Hold, suggested_max_exposure_us: cur }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: u32, h: u32) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, PixelFormat::Gray8, (0..w * h).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn histogram_cases() {
        let gray = Image::filled(10, 10, PixelFormat::Gray8, 128);
        let hist = histogram(&gray);
        assert_eq!(hist[128], 100);
        assert_eq!(hist.iter().filter(|&&c| c > 0).count(), 1);
        let checker: Vec<u8> = (0..64).map(|i| if (i % 8 + i / 8) % 2 == 0 { 0 } else { 255 }).collect();
        let hist = histogram(&Image::new(8, 8, PixelFormat::Gray8, checker).unwrap());
        assert_eq!((hist[0], hist[255]), (32, 32));
        let img = random_image(1, 37, 23);
        assert_eq!(histogram(&img).iter().sum::<u64>(), 37 * 23);
    }

    #[test]
    fn uniform_image_has_zero_sharpness() {
        let r = sharpness(&Image::filled(64, 64, PixelFormat::Rgb8, 90), 16, 500.0);
        assert_eq!(r.global_score, 0.0);
        assert_eq!((r.tiles_x, r.tiles_y), (4, 4));
    }

    #[test]
    fn partial_tiles_cover_image() {
        let r = sharpness(&random_image(2, 70, 33), 32, 500.0);
        assert_eq!((r.tiles_x, r.tiles_y), (3, 2));
        assert!(r.tile_scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn repeated_blur_strictly_lowers_sharpness() {
        let mut img = random_image(3, 96, 96);
        let mut prev = sharpness(&img, 32, 500.0).global_score;
        for _ in 0..5 {
            img = box_blur(&img, 1);
            let s = sharpness(&img, 32, 500.0).global_score;
            assert!(s < prev, "{s} !< {prev}");
            prev = s;
        }
    }

    fn report(score: f64) -> SharpnessReport {
        SharpnessReport { global_score: score, tile_px: 64, tiles_x: 1, tiles_y: 1, tile_scores: alloc::vec![score], exposure_us: 0.0 }
    }

    #[test]
    fn advice_rule_cases() {
        let p = AdviceParams::default();
        let mut bright = [0u64; 256];
        bright[200] = 1000;
        let mut dark = [0u64; 256];
        dark[3] = 300;
        dark[100] = 700;
        let a = exposure_advice(&bright, &report(5.0), 2000.0, &p);
        assert_eq!(a, ExposureAdvice { action: ExposureAction::Lower, suggested_max_exposure_us: 1000.0 });
        let a = exposure_advice(&dark, &report(400.0), 500.0, &p);
        assert_eq!(a, ExposureAdvice { action: ExposureAction::Raise, suggested_max_exposure_us: 1000.0 });
        let a = exposure_advice(&bright, &report(400.0), 500.0, &p);
        assert_eq!(a.action, ExposureAction::Hold);
        // At the floor a blurred frame cannot lower further.
        assert_eq!(exposure_advice(&bright, &report(5.0), 500.0, &p).action, ExposureAction::Hold);
    }
}
