use std::io::{Cursor, Read, Write};

use adapt_core::analytics::{Image, PixelFormat, SegMask};

use super::FormatError;

pub const THUMBNAIL_LONG_EDGE: u32 = 640;
pub const THUMBNAIL_QUALITY: u8 = 60;

fn png_err(e: impl std::fmt::Display) -> FormatError {
    FormatError::Png(e.to_string())
}

fn read_png(mut r: impl Read, transform: png::Transformations) -> Result<(png::OutputInfo, Vec<u8>), FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(transform);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

fn write_png(w: &mut dyn Write, width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<(), FormatError> {
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Mask PNG: 8-bit single channel (gray or palette indices) holding class
/// ids.
pub fn read_mask_png(r: impl Read) -> Result<SegMask, FormatError> {
    let (info, data) = read_png(r, png::Transformations::IDENTITY)?;
    match (info.color_type, info.bit_depth) {
        (png::ColorType::Grayscale | png::ColorType::Indexed, png::BitDepth::Eight) => {
            Ok(SegMask::new(info.width, info.height, data))
        }
        (c, d) => Err(FormatError::Invalid(format!("mask must be 8-bit single channel, found {c:?} at {d:?}"))),
    }
}

/// Writes the mask at its own resolution; `scale` is not recorded.
pub fn write_mask_png(w: &mut dyn Write, mask: &SegMask) -> Result<(), FormatError> {
    write_png(w, mask.width, mask.height, png::ColorType::Grayscale, &mask.classes)
}

/// Any 8-bit PNG as RGB. Fully transparent pixels read as black, the
/// unlabeled color of painted label layers.
pub fn read_rgb_png(r: impl Read) -> Result<Image, FormatError> {
    let (info, data) = read_png(r, png::Transformations::EXPAND | png::Transformations::STRIP_16)?;
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => data,
        png::ColorType::Rgba => data.chunks_exact(4).flat_map(|p| if p[3] == 0 { [0; 3] } else { [p[0], p[1], p[2]] }).collect(),
        png::ColorType::Grayscale => data.iter().flat_map(|&g| [g; 3]).collect(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).flat_map(|p| [if p[1] == 0 { 0 } else { p[0] }; 3]).collect(),
        png::ColorType::Indexed => return Err(png_err("palette was not expanded")),
    };
    Image::new(info.width, info.height, PixelFormat::Rgb8, rgb).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn write_rgb_png(w: &mut dyn Write, image: &Image) -> Result<(), FormatError> {
    match image.format {
        PixelFormat::Rgb8 => write_png(w, image.width, image.height, png::ColorType::Rgb, &image.data),
        PixelFormat::Gray8 => write_png(w, image.width, image.height, png::ColorType::Grayscale, &image.data),
    }
}

/// Area-averaged downscale so the long edge is at most `long_edge`.
fn downscale(image: &Image, long_edge: u32) -> Image {
    let (w, h) = (image.width, image.height);
    let long = w.max(h);
    if long <= long_edge {
        return image.clone();
    }
    let s = long as f64 / long_edge as f64;
    let ow = ((w as f64 / s).round() as u32).max(1);
    let oh = ((h as f64 / s).round() as u32).max(1);
    let ch = image.format.channels();
    let span = |o: u32, n: u32, out: u32| {
        let a = (o as u64 * n as u64 / out as u64) as u32;
        let b = (((o as u64 + 1) * n as u64).div_ceil(out as u64) as u32).min(n);
        (a, b.max(a + 1))
    };
    let mut data = Vec::with_capacity(ow as usize * oh as usize * ch);
    for oy in 0..oh {
        let (y0, y1) = span(oy, h, oh);
        for ox in 0..ow {
            let (x0, x1) = span(ox, w, ow);
            let mut acc = [0u32; 3];
            for y in y0..y1 {
                let row = (y as usize * w as usize) * ch;
                for x in x0..x1 {
                    let i = row + x as usize * ch;
                    for (c, a) in acc.iter_mut().enumerate().take(ch) {
                        *a += image.data[i + c] as u32;
                    }
                }
            }
            let n = (y1 - y0) * (x1 - x0);
            data.extend(acc[..ch].iter().map(|&a| ((a + n / 2) / n) as u8));
        }
    }
    Image { width: ow, height: oh, format: image.format, data }
}

/// Reduced-resolution JPEG view of a frame. Returns `(width, height, jpeg)`.
pub fn thumbnail_jpeg(image: &Image, long_edge: u32, quality: u8) -> Result<(u16, u16, Vec<u8>), FormatError> {
    let small = downscale(image, long_edge.min(u16::MAX as u32));
    let (w, h) = (small.width as u16, small.height as u16);
    let color = match small.format {
        PixelFormat::Rgb8 => jpeg_encoder::ColorType::Rgb,
        PixelFormat::Gray8 => jpeg_encoder::ColorType::Luma,
    };
    let mut out = Vec::new();
    jpeg_encoder::Encoder::new(&mut out, quality)
        .encode(&small.data, w, h, color)
        .map_err(|e| FormatError::Jpeg(e.to_string()))?;
    Ok((w, h, out))
}

/// Frame size from the first SOF marker of a baseline or progressive JPEG.
pub fn decode_jpeg_size(jpeg: &[u8]) -> Option<(u16, u16)> {
    if jpeg.get(..2)? != [0xFF, 0xD8] {
        return None;
    }
    let mut i = 2;
    while i + 4 <= jpeg.len() {
        if jpeg[i] != 0xFF {
            return None;
        }
        let marker = jpeg[i + 1];
        let len = u16::from_be_bytes([jpeg[i + 2], jpeg[i + 3]]) as usize;
        if matches!(marker, 0xC0..=0xC3) {
            let h = u16::from_be_bytes([*jpeg.get(i + 5)?, *jpeg.get(i + 6)?]);
            let w = u16::from_be_bytes([*jpeg.get(i + 7)?, *jpeg.get(i + 8)?]);
            return Some((w, h));
        }
        i += 2 + len;
    }
    None
}
