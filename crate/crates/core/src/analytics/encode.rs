//! Canonical polygon encoding.
//!
//! Per ring: class id (u8), varint `(vertex_count << 1) | is_hole` where the
//! count excludes the closing vertex, the first vertex as two big-endian
//! i32 in 1/16 px, then zig-zag varint deltas for the remaining vertices.
//! Each exterior is followed by its holes. The concatenation is deflated.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::Point2;
use thiserror::Error;

use crate::polygon::{ClassPolygon, PixelPolygon};

pub const FIXED_POINT_SCALE: f64 = 16.0;
const DEFLATE_LEVEL: u8 = 9;
/// Refuse to inflate beyond this; guards against hostile payloads.
const MAX_INFLATED: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("deflate stream is corrupt")]
    Inflate,
    #[error("polygon stream truncated at byte {0}")]
    Truncated(usize),
    #[error("varint overflow at byte {0}")]
    Varint(usize),
    #[error("hole ring at byte {0} has no preceding exterior of the same class")]
    OrphanHole(usize),
    #[error("ring at byte {0} has fewer than 3 vertices")]
    ShortRing(usize),
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

fn fixed(v: f64, scale: f64) -> i32 {
    (v * scale).round() as i32
}

fn put_ring(out: &mut Vec<u8>, class: u8, ring: &[Point2<f64>], hole: bool, scale: f64) {
    let n = if ring.len() > 1 && ring.first() == ring.last() { ring.len() - 1 } else { ring.len() };
    out.push(class);
    put_varint(out, ((n as u64) << 1) | u64::from(hole));
    let (mut px, mut py) = (fixed(ring[0].x, scale), fixed(ring[0].y, scale));
    out.extend_from_slice(&px.to_be_bytes());
    out.extend_from_slice(&py.to_be_bytes());
    for p in &ring[1..n] {
        let (x, y) = (fixed(p.x, scale), fixed(p.y, scale));
        put_varint(out, zigzag(x as i64 - px as i64));
        put_varint(out, zigzag(y as i64 - py as i64));
        (px, py) = (x, y);
    }
}

/// The uncompressed ring stream with coordinates quantized to `1/scale`.
pub fn encode_raw_with(polygons: &[PixelPolygon], scale: f64) -> Vec<u8> {
    let mut out = Vec::new();
    for p in polygons {
        put_ring(&mut out, p.class_id, &p.exterior, false, scale);
        for h in &p.holes {
            put_ring(&mut out, p.class_id, h, true, scale);
        }
    }
    out
}

pub fn encode_raw(polygons: &[PixelPolygon]) -> Vec<u8> {
    encode_raw_with(polygons, FIXED_POINT_SCALE)
}

/// Canonical, deflated encoding. Its length is what the byte budget limits.
pub fn encode_polygons(polygons: &[PixelPolygon]) -> Vec<u8> {
    encode_polygons_with(polygons, FIXED_POINT_SCALE)
}

pub fn encode_polygons_with(polygons: &[PixelPolygon], scale: f64) -> Vec<u8> {
    miniz_oxide::deflate::compress_to_vec(&encode_raw_with(polygons, scale), DEFLATE_LEVEL)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn byte(&mut self) -> Result<u8, DecodeError> {
        let b = *self.buf.get(self.pos).ok_or(DecodeError::Truncated(self.pos))?;
        self.pos += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64, DecodeError> {
        let start = self.pos;
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(DecodeError::Varint(start))
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        let s = self.buf.get(self.pos..self.pos + 4).ok_or(DecodeError::Truncated(self.pos))?;
        self.pos += 4;
        Ok(i32::from_be_bytes([s[0], s[1], s[2], s[3]]))
    }
}

pub fn decode_polygons(bytes: &[u8]) -> Result<Vec<PixelPolygon>, DecodeError> {
    decode_polygons_with(bytes, FIXED_POINT_SCALE)
}

pub fn decode_polygons_with(bytes: &[u8], scale: f64) -> Result<Vec<PixelPolygon>, DecodeError> {
    let raw = miniz_oxide::inflate::decompress_to_vec_with_limit(bytes, MAX_INFLATED).map_err(|_| DecodeError::Inflate)?;
    let mut r = Reader { buf: &raw, pos: 0 };
    let mut out: Vec<PixelPolygon> = Vec::new();
    while r.pos < raw.len() {
        let at = r.pos;
        let class = r.byte()?;
        let head = r.varint()?;
        let (n, hole) = ((head >> 1) as usize, head & 1 == 1);
        if n < 3 {
            return Err(DecodeError::ShortRing(at));
        }
        let (mut x, mut y) = (r.i32()? as i64, r.i32()? as i64);
        let mut ring = Vec::with_capacity(n.min(raw.len()) + 1);
        ring.push(Point2::new(x as f64 / scale, y as f64 / scale));
        for _ in 1..n {
            x += unzigzag(r.varint()?);
            y += unzigzag(r.varint()?);
            ring.push(Point2::new(x as f64 / scale, y as f64 / scale));
        }
        ring.push(ring[0]);
        if hole {
            match out.last_mut() {
                Some(p) if p.class_id == class => p.holes.push(ring),
                _ => return Err(DecodeError::OrphanHole(at)),
            }
        } else {
            out.push(ClassPolygon { class_id: class, exterior: ring, holes: Vec::new() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn varint_and_zigzag() {
        for v in [0i64, 1, -1, 63, -64, 64, 1 << 40, i32::MIN as i64 * 2] {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
        let mut out = Vec::new();
        put_varint(&mut out, 300);
        assert_eq!(out, [0xac, 0x02]);
    }

    #[test]
    fn square_layout_is_bit_exact() {
        let ring = vec![
            Point2::new(1.0, 2.0),
            Point2::new(3.0, 2.0),
            Point2::new(3.0, 4.5),
            Point2::new(1.0, 4.5),
            Point2::new(1.0, 2.0),
        ];
        let p = ClassPolygon { class_id: 1, exterior: ring, holes: vec![] };
        let raw = encode_raw(&[p.clone()]);
        assert_eq!(
            raw,
            [1, 8, 0, 0, 0, 16, 0, 0, 0, 32, 64, 0, 0, 80, 63, 0]
        );
        assert_eq!(decode_polygons(&encode_polygons(&[p.clone()])).unwrap(), vec![p]);
    }

    #[test]
    fn orphan_hole_rejected() {
        let ring = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(0.0, 0.0)];
        let mut raw = Vec::new();
        put_ring(&mut raw, 1, &ring, true, FIXED_POINT_SCALE);
        let z = miniz_oxide::deflate::compress_to_vec(&raw, 6);
        assert_eq!(decode_polygons(&z), Err(DecodeError::OrphanHole(0)));
        assert_eq!(decode_polygons(&[1, 2, 3]), Err(DecodeError::Inflate));
    }

    proptest! {
        #[test]
        fn round_trip(rings in prop::collection::vec(
            (any::<u8>(), prop::collection::vec((-100_000i32..100_000, -100_000i32..100_000), 3..40), 0usize..3),
            0..8,
        )) {
            let polys: Vec<PixelPolygon> = rings.iter().map(|(class, pts, holes)| {
                let mut r: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x as f64 / 16.0, y as f64 / 16.0)).collect();
                r.push(r[0]);
                ClassPolygon { class_id: *class, exterior: r.clone(), holes: vec![r; *holes] }
            }).collect();
            prop_assert_eq!(decode_polygons(&encode_polygons(&polys)).unwrap(), polys);
        }
    }
}
