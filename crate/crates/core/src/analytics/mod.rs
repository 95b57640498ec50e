//! Onboard image analytics: segmentation behind a backend interface,
//! byte-budgeted mask vectorization, and the image-quality signals that feed
//! the operator's exposure loop.

mod contour;
mod encode;
mod quality;
mod raster;
mod segment;
mod simplify;
mod vectorize;

pub use contour::{trace_class, trace_contours, ContourSet};
pub use encode::{
    decode_polygons, decode_polygons_with, encode_polygons, encode_polygons_with, encode_raw, encode_raw_with, DecodeError,
    FIXED_POINT_SCALE,
};
pub use quality::{
    box_blur, exposure_advice, histogram, sharpness, AdviceParams, ExposureAction, ExposureAdvice, SharpnessReport,
    Histogram,
};
pub use raster::{class_iou, rasterize_even_odd, rasterize_oracle, iou_masks};
pub use segment::{
    segment, ClassInfo, InputConstraints, ReferenceSegmenter, SegmentError, SegmenterBackend, DEFAULT_CLASSES,
};
pub use simplify::{douglas_peucker_ring, simplify_polygon};
pub use vectorize::{
    mask_polygons, vectorize, vectorize_at, ClassIou, Vectorized, VectorizeError, MAX_TOLERANCE_PX, MIN_BUDGET_BYTES,
    START_TOLERANCE_PX,
};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_FROZEN_WATER: u8 = 1;
pub const CLASS_UNLABELED: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelFormat {
    Gray8,
    Rgb8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            Self::Gray8 => 1,
            Self::Rgb8 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("buffer holds {got} bytes, {width}×{height} {format:?} needs {need}")]
    BufferSize { width: u32, height: u32, format: PixelFormat, need: usize, got: usize },
    #[error("image is empty")]
    Empty,
}

/// A packed 8-bit image, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub format: PixelFormat,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, format: PixelFormat, data: Vec<u8>) -> Result<Self, ImageError> {
        let need = width as usize * height as usize * format.channels();
        if need == 0 {
            return Err(ImageError::Empty);
        }
        if data.len() != need {
            return Err(ImageError::BufferSize { width, height, format, need, got: data.len() });
        }
        Ok(Self { width, height, format, data })
    }

    pub fn filled(width: u32, height: u32, format: PixelFormat, value: u8) -> Self {
        Self { width, height, format, data: vec![value; width as usize * height as usize * format.channels()] }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * self.format.channels();
        match self.format {
            PixelFormat::Gray8 => [self.data[i]; 3],
            PixelFormat::Rgb8 => [self.data[i], self.data[i + 1], self.data[i + 2]],
        }
    }

    /// BT.601 luma.
    pub fn luma(&self, x: u32, y: u32) -> u8 {
        match self.format {
            PixelFormat::Gray8 => self.data[y as usize * self.width as usize + x as usize],
            PixelFormat::Rgb8 => luma_of(self.rgb(x, y)),
        }
    }

    pub fn luma_plane(&self) -> Vec<u8> {
        match self.format {
            PixelFormat::Gray8 => self.data.clone(),
            PixelFormat::Rgb8 => self.data.chunks_exact(3).map(|c| luma_of([c[0], c[1], c[2]])).collect(),
        }
    }
}

pub fn luma_of([r, g, b]: [u8; 3]) -> u8 {
    ((77 * r as u32 + 150 * g as u32 + 29 * b as u32 + 128) >> 8) as u8
}

/// Per-pixel class map, possibly at a reduced resolution: mask pixel
/// `(i, j)` covers source pixels `[scale·i, scale·(i+1))` on each axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegMask {
    pub width: u32,
    pub height: u32,
    pub scale: u32,
    pub classes: Vec<u8>,
}

impl SegMask {
    pub fn new(width: u32, height: u32, classes: Vec<u8>) -> Self {
        assert_eq!(classes.len(), width as usize * height as usize, "class buffer size");
        Self { width, height, scale: 1, classes }
    }

    pub fn filled(width: u32, height: u32, class: u8) -> Self {
        Self::new(width, height, vec![class; width as usize * height as usize])
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.classes[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, class: u8) {
        self.classes[y as usize * self.width as usize + x as usize] = class;
    }

    /// Distinct class ids present, ascending.
    pub fn present_classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &c in &self.classes {
            seen[c as usize] = true;
        }
        (0..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    pub fn count(&self, class: u8) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}
