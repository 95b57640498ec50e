//! Segmentation backends.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{luma_of, Image, SegMask, CLASS_BACKGROUND, CLASS_FROZEN_WATER, CLASS_UNLABELED};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: u8,
    pub name: String,
}

pub const DEFAULT_CLASSES: [(u8, &str); 2] = [(CLASS_BACKGROUND, "background"), (CLASS_FROZEN_WATER, "frozen_water")];

/// Input sizes a backend accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputConstraints {
    pub min_width: u32,
    pub min_height: u32,
    pub max_width: u32,
    pub max_height: u32,
    /// Both dimensions must be multiples of this.
    pub multiple_of: u32,
}

impl InputConstraints {
    pub fn check(&self, w: u32, h: u32) -> Result<(), SegmentError> {
        let ok = (self.min_width..=self.max_width).contains(&w)
            && (self.min_height..=self.max_height).contains(&h)
            && w % self.multiple_of.max(1) == 0
            && h % self.multiple_of.max(1) == 0;
        if ok {
            Ok(())
        } else {
            Err(SegmentError::InputSize { width: w, height: h, constraints: *self })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("input {width}×{height} violates backend constraints {constraints:?}")]
    InputSize { width: u32, height: u32, constraints: InputConstraints },
    #[error("backend returned {got:?}, contract requires {want:?}")]
    OutputSize { got: (u32, u32), want: (u32, u32) },
    #[error("backend emitted class {0} outside its class table")]
    UnknownClass(u8),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// A segmentation model. Implementations must be deterministic: the same
/// image always yields the same mask.
pub trait SegmenterBackend {
    fn name(&self) -> &str;
    fn constraints(&self) -> InputConstraints;
    fn class_table(&self) -> Vec<ClassInfo>;
    /// Downsampling applied before inference.
    fn scale(&self) -> u32;
    fn infer(&mut self, image: &Image) -> Result<SegMask, SegmentError>;
}

/// Runs a backend and enforces its output contract: mask dimensions equal
/// the input divided by the backend scale (rounded up), full coverage, and
/// only declared classes.
pub fn segment<B: SegmenterBackend + ?Sized>(backend: &mut B, image: &Image) -> Result<SegMask, SegmentError> {
    backend.constraints().check(image.width, image.height)?;
    let mut mask = backend.infer(image)?;
    let s = backend.scale().max(1);
    let want = (image.width.div_ceil(s), image.height.div_ceil(s));
    if (mask.width, mask.height) != want || mask.classes.len() != (want.0 * want.1) as usize {
        return Err(SegmentError::OutputSize { got: (mask.width, mask.height), want });
    }
    let mut allowed = [false; 256];
    for c in backend.class_table() {
        allowed[c.id as usize] = true;
    }
    if let Some(&bad) = mask.classes.iter().find(|&&c| !allowed[c as usize] || c == CLASS_UNLABELED) {
        return Err(SegmentError::UnknownClass(bad));
    }
    mask.scale = s;
    Ok(mask)
}

/// Fixed-threshold luma plus blue-chroma classifier on a 2× box-downsampled
/// image. Bright pixels with non-negative blue chroma are frozen water.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSegmenter {
    pub luma_threshold: u8,
    /// Minimum `B − Y`.
    pub min_blue_chroma: i16,
    pub downsample: u32,
}

impl Default for ReferenceSegmenter {
    fn default() -> Self {
        Self { luma_threshold: 128, min_blue_chroma: 0, downsample: 2 }
    }
}

impl ReferenceSegmenter {
    pub fn classify(&self, rgb: [u8; 3]) -> u8 {
        let y = luma_of(rgb);
        if y >= self.luma_threshold && rgb[2] as i16 - y as i16 >= self.min_blue_chroma {
            CLASS_FROZEN_WATER
        } else {
            CLASS_BACKGROUND
        }
    }
}

impl SegmenterBackend for ReferenceSegmenter {
    fn name(&self) -> &str {
        "reference-threshold"
    }

    fn constraints(&self) -> InputConstraints {
        InputConstraints { min_width: 1, min_height: 1, max_width: 16384, max_height: 16384, multiple_of: 1 }
    }

    fn class_table(&self) -> Vec<ClassInfo> {
        DEFAULT_CLASSES.iter().map(|&(id, name)| ClassInfo { id, name: name.into() }).collect()
    }

    fn scale(&self) -> u32 {
        self.downsample.max(1)
    }

    fn infer(&mut self, image: &Image) -> Result<SegMask, SegmentError> {
        let s = self.scale();
        let (w, h) = (image.width.div_ceil(s), image.height.div_ceil(s));
        let mut classes = Vec::with_capacity((w * h) as usize);
        for j in 0..h {
            for i in 0..w {
                let mut acc = [0u32; 3];
                let mut n = 0;
                for y in j * s..((j + 1) * s).min(image.height) {
                    for x in i * s..((i + 1) * s).min(image.width) {
                        let p = image.rgb(x, y);
                        for c in 0..3 {
                            acc[c] += p[c] as u32;
                        }
                        n += 1;
                    }
                }
                let avg = acc.map(|v| ((v + n / 2) / n) as u8);
                classes.push(self.classify(avg));
            }
        }
        Ok(SegMask::new(w, h, classes))
    }
}
