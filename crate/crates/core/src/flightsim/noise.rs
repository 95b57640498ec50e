//! Seeded lattice value noise and its fractal sum.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

fn hash2(seed: u64, x: i64, y: i64) -> f64 {
    let mut z = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Smoothly interpolated lattice noise in `[0, 1)`, one lattice cell per unit.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (u, v) = (fade(x - x0), fade(y - y0));
    let a = hash2(seed, ix, iy);
    let b = hash2(seed, ix + 1, iy);
    let c = hash2(seed, ix, iy + 1);
    let d = hash2(seed, ix + 1, iy + 1);
    let top = a + (b - a) * u;
    let bottom = c + (d - c) * u;
    top + (bottom - top) * v
}

/// Fractal sum of `octaves` noise layers, each at twice the frequency and
/// half the amplitude of the last. Layers are rotated against each other to
/// hide lattice alignment. Output is normalized to `[0, 1)`.
pub fn fbm(seed: u64, x: f64, y: f64, octaves: u32) -> f64 {
    const ROT: (f64, f64) = (0.479_425_538_604_203, 0.877_582_561_890_372_8); // sin, cos of 0.5
    let (mut x, mut y) = (x, y);
    let (mut sum, mut amp, mut norm) = (0.0, 1.0, 0.0);
    for o in 0..octaves.max(1) {
        sum += amp * value_noise(seed.wrapping_add(o as u64 * 0x51_7CC1_B727_220A), x, y);
        norm += amp;
        amp *= 0.5;
        let (s, c) = ROT;
        (x, y) = (2.0 * (c * x - s * y) + 17.31, 2.0 * (s * x + c * y) - 5.77);
    }
    sum / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_deterministic_bounded_and_continuous() {
        for i in 0..2000 {
            let (x, y) = (i as f64 * 0.137 - 50.0, i as f64 * -0.071 + 3.0);
            let v = value_noise(9, x, y);
            assert!((0.0..1.0).contains(&v));
            assert_eq!(v, value_noise(9, x, y));
            assert!((value_noise(9, x + 1e-7, y) - v).abs() < 1e-5);
            assert!((0.0..1.0).contains(&fbm(9, x, y, 5)));
        }
        assert_ne!(value_noise(1, 0.5, 0.5), value_noise(2, 0.5, 0.5));
    }

    #[test]
    fn lattice_points_are_hash_values() {
        assert_eq!(value_noise(3, 4.0, -2.0), hash2(3, 4, -2));
    }
}
