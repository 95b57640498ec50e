//! Synthetic river-ice scene on the mission ground plane.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::noise::{fbm, value_noise};
use super::SimError;
use crate::analytics::{SegMask, CLASS_BACKGROUND, CLASS_FROZEN_WATER};
use crate::geo::{EnuFrame, GeodeticPosition};

const TONE_SALT: u64 = 0x70_4E;
const GRAIN_SALT: u64 = 0x6A_A1;

pub const ICE_LUMINANCE: f64 = 205.0;
pub const BACKGROUND_LUMINANCE: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    /// East and north extent in meters.
    pub extent_m: [f64; 2],
    /// ENU coordinates of the scene center.
    pub center_m: [f64; 2],
    /// Raster cell size.
    pub resolution_m: f64,
    /// Wavelength of the coarsest ice/water feature.
    pub feature_m: f64,
    pub octaves: u32,
    pub ice_fraction: f64,
    /// Wavelength of the surface grain that gives frames pixel-scale texture.
    pub grain_m: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            extent_m: [200.0, 300.0],
            center_m: [0.0, 0.0],
            resolution_m: 0.25,
            feature_m: 60.0,
            octaves: 5,
            ice_fraction: 0.45,
            grain_m: 0.005,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.extent_m[0]) && pos(self.extent_m[1])) {
            return Err(SimError::Scene("extent must be positive"));
        }
        if !(pos(self.resolution_m) && pos(self.feature_m) && pos(self.grain_m)) {
            return Err(SimError::Scene("resolution, feature and grain sizes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.ice_fraction) {
            return Err(SimError::Scene("ice fraction outside [0, 1]"));
        }
        let cells = (self.extent_m[0] / self.resolution_m).ceil() * (self.extent_m[1] / self.resolution_m).ceil();
        if cells > 64e6 {
            return Err(SimError::Scene("raster larger than 64 M cells"));
        }
        Ok(())
    }

    /// Resizes the scene to cover `[e_min, n_min, e_max, n_max]` plus `margin_m`.
    pub fn covering(mut self, bounds: [f64; 4], margin_m: f64) -> Self {
        self.center_m = [0.5 * (bounds[0] + bounds[2]), 0.5 * (bounds[1] + bounds[3])];
        self.extent_m = [bounds[2] - bounds[0] + 2.0 * margin_m, bounds[3] - bounds[1] + 2.0 * margin_m];
        self
    }
}

/// Frozen water / background regions with a luminance field.
///
/// Classes are defined everywhere by thresholding a fractal field, so
/// rendering sees the true boundary at any ground resolution. The rasters
/// sample that definition at cell centers; row 0 is the northern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScene {
    pub config: SceneConfig,
    pub frame: EnuFrame,
    pub width: u32,
    pub height: u32,
    threshold: f64,
    pub classes: Vec<u8>,
    pub luminance: Vec<u8>,
}

impl SimScene {
    /// `origin` is the ground-level ENU origin shared with the mission.
    pub fn generate(config: SceneConfig, origin: GeodeticPosition) -> Result<Self, SimError> {
        config.validate()?;
        let frame = EnuFrame::new(origin)?;
        let width = (config.extent_m[0] / config.resolution_m).ceil() as u32;
        let height = (config.extent_m[1] / config.resolution_m).ceil() as u32;
        let mut scene =
            Self { config, frame, width, height, threshold: 0.0, classes: Vec::new(), luminance: Vec::new() };
        let n = width as usize * height as usize;
        let mut field = Vec::with_capacity(n);
        for j in 0..height {
            for i in 0..width {
                let (e, nn) = scene.cell_center(i, j);
                field.push(scene.field(e, nn));
            }
        }
        scene.threshold = quantile_threshold(&field, scene.config.ice_fraction);
        scene.classes = field.iter().map(|&v| class_of(v, scene.threshold)).collect();
        let mut lum = vec![0u8; n];
        for j in 0..height {
            for i in 0..width {
                let (e, nn) = scene.cell_center(i, j);
                let k = j as usize * width as usize + i as usize;
                lum[k] = scene.luminance_for(scene.classes[k], e, nn).round() as u8;
            }
        }
        scene.luminance = lum;
        Ok(scene)
    }

    pub fn origin(&self) -> GeodeticPosition {
        self.frame.origin()
    }

    /// `[e_min, n_min, e_max, n_max]`.
    pub fn bounds(&self) -> [f64; 4] {
        let [ce, cn] = self.config.center_m;
        let (hw, hh) = (0.5 * self.width as f64 * self.config.resolution_m, 0.5 * self.height as f64 * self.config.resolution_m);
        [ce - hw, cn - hh, ce + hw, cn + hh]
    }

    pub fn contains(&self, e: f64, n: f64) -> bool {
        let b = self.bounds();
        e >= b[0] && e <= b[2] && n >= b[1] && n <= b[3]
    }

    pub fn cell_center(&self, i: u32, j: u32) -> (f64, f64) {
        let b = self.bounds();
        let r = self.config.resolution_m;
        (b[0] + (i as f64 + 0.5) * r, b[3] - (j as f64 + 0.5) * r)
    }

    /// Cell containing `(e, n)`, if inside the scene.
    pub fn cell_of(&self, e: f64, n: f64) -> Option<(u32, u32)> {
        let b = self.bounds();
        let r = self.config.resolution_m;
        let i = ((e - b[0]) / r).floor();
        let j = ((b[3] - n) / r).floor();
        (i >= 0.0 && j >= 0.0 && i < self.width as f64 && j < self.height as f64).then_some((i as u32, j as u32))
    }

    fn field(&self, e: f64, n: f64) -> f64 {
        let s = self.config.feature_m;
        fbm(self.config.seed, e / s, n / s, self.config.octaves)
    }

    pub fn class_at(&self, e: f64, n: f64) -> u8 {
        class_of(self.field(e, n), self.threshold)
    }

    fn luminance_for(&self, class: u8, e: f64, n: f64) -> f64 {
        let c = &self.config;
        let tone = fbm(c.seed ^ TONE_SALT, 4.0 * e / c.feature_m, 4.0 * n / c.feature_m, 3) - 0.5;
        let grain = value_noise(c.seed ^ GRAIN_SALT, e / c.grain_m, n / c.grain_m) - 0.5;
        let base = if class == CLASS_FROZEN_WATER { ICE_LUMINANCE } else { BACKGROUND_LUMINANCE };
        base + 40.0 * tone + 40.0 * grain
    }

    pub fn luminance_at(&self, e: f64, n: f64) -> f64 {
        self.luminance_for(self.class_at(e, n), e, n)
    }

    /// Surface color. Ice is bright and slightly blue, the background dark
    /// and brown.
    pub fn rgb_at(&self, e: f64, n: f64) -> [f64; 3] {
        self.sample(e, n).1
    }

    /// Class and color at one point.
    pub fn sample(&self, e: f64, n: f64) -> (u8, [f64; 3]) {
        let class = self.class_at(e, n);
        let l = self.luminance_for(class, e, n);
        let rgb = if class == CLASS_FROZEN_WATER { [l - 12.0, l, (l + 20.0).min(255.0)] } else { [l + 15.0, l, l - 20.0] };
        (class, rgb)
    }

    pub fn ice_cells(&self) -> usize {
        self.classes.iter().filter(|&&c| c == CLASS_FROZEN_WATER).count()
    }

    pub fn cell_area(&self) -> f64 {
        self.config.resolution_m * self.config.resolution_m
    }
}

fn class_of(v: f64, threshold: f64) -> u8 {
    if v > threshold {
        CLASS_FROZEN_WATER
    } else {
        CLASS_BACKGROUND
    }
}

/// Value such that a fraction `above` of `field` exceeds it.
fn quantile_threshold(field: &[f64], above: f64) -> f64 {
    if field.is_empty() {
        return 0.5;
    }
    if above <= 0.0 {
        return f64::INFINITY;
    }
    if above >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut v = field.to_vec();
    let k = (((1.0 - above) * v.len() as f64) as usize).min(v.len() - 1);
    let (_, kth, _) = v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *kth
}

/// A seeded fractal two-class mask in pixel space, the stand-in for
/// segmented river ice.
pub fn fractal_mask(seed: u64, width: u32, height: u32, feature_px: f64, octaves: u32, ice_fraction: f64) -> SegMask {
    let mut field = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            field.push(fbm(seed, (x as f64 + 0.5) / feature_px, (y as f64 + 0.5) / feature_px, octaves));
        }
    }
    let t = quantile_threshold(&field, ice_fraction);
    SegMask::new(width, height, field.iter().map(|&v| class_of(v, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{luma_of, ReferenceSegmenter};

    fn scene() -> SimScene {
        let cfg = SceneConfig { extent_m: [60.0, 40.0], resolution_m: 0.5, ..SceneConfig::default() };
        SimScene::generate(cfg, GeodeticPosition::new(64.8, -147.7, 120.0).unwrap()).unwrap()
    }

    #[test]
    fn rasters_agree_with_point_queries() {
        let s = scene();
        assert_eq!((s.width, s.height), (120, 80));
        assert_eq!(s.classes.len(), s.luminance.len());
        for (j, i) in [(0, 0), (79, 119), (40, 60), (13, 101)] {
            let (e, n) = s.cell_center(i, j);
            let k = j as usize * 120 + i as usize;
            assert_eq!(s.classes[k], s.class_at(e, n));
            assert_eq!(s.luminance[k], s.luminance_at(e, n).round() as u8);
            assert_eq!(s.cell_of(e, n), Some((i, j)));
        }
        let frac = s.ice_cells() as f64 / s.classes.len() as f64;
        assert!((frac - 0.45).abs() < 0.01, "{frac}");
        assert_eq!(s, scene());
    }

    #[test]
    fn colors_separate_under_reference_threshold() {
        let s = scene();
        let seg = ReferenceSegmenter::default();
        for k in 0..4000 {
            let (e, n) = (-29.0 + (k % 80) as f64 * 0.73, -19.0 + (k / 80) as f64 * 0.77);
            let rgb = s.rgb_at(e, n).map(|v| v.round().clamp(0.0, 255.0) as u8);
            assert_eq!(seg.classify(rgb), s.class_at(e, n), "{rgb:?} y={}", luma_of(rgb));
        }
    }

    #[test]
    fn fractal_mask_hits_fraction_and_is_seeded() {
        let a = fractal_mask(4, 256, 128, 64.0, 5, 0.4);
        let frac = a.count(CLASS_FROZEN_WATER) as f64 / (256.0 * 128.0);
        assert!((frac - 0.4).abs() < 0.001, "{frac}");
        assert_eq!(a, fractal_mask(4, 256, 128, 64.0, 5, 0.4));
        assert_ne!(a, fractal_mask(5, 256, 128, 64.0, 5, 0.4));
    }

    #[test]
    fn config_validation() {
        let bad = SceneConfig { resolution_m: 0.0, ..SceneConfig::default() };
        assert!(bad.validate().is_err());
        let huge = SceneConfig { extent_m: [1e5, 1e5], ..SceneConfig::default() };
        assert!(huge.validate().is_err());
    }
}
