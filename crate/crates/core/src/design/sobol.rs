//! Base-2 Sobol' sequence with optional hash-based Owen scrambling.
//!
//! Points are produced in Gray-code order with 32-bit direction integers built
//! from the Joe & Kuo tables. A scramble key applies a nested uniform scramble
//! per dimension; the scramble is a bijection on 32-bit words in which every
//! output digit depends only on the same and more significant input digits, so
//! every elementary interval keeps exactly the same number of points.

use super::direction_numbers::DIRECTION_NUMBERS;
use crate::error::{Error, Result};

/// Highest supported dimension.
pub const MAX_DIMENSION: usize = 64;

const BITS: usize = 32;

/// Generates an `n x k` row-major matrix of points in `[0, 1)^k`.
///
/// `seed == 0` yields the raw sequence, whose first point is the origin; any
/// other seed keys the scramble.
pub fn sobol_sequence(k: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    sobol_points(k, n, (seed != 0).then_some(seed))
}

/// Like [`sobol_sequence`], with the scramble key explicit: `None` is the raw
/// sequence and `Some(0)` is a scramble like any other key.
pub fn sobol_points(k: usize, n: usize, scramble: Option<u64>) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::input("Sobol' dimension must be at least 1"));
    }
    if k > MAX_DIMENSION {
        return Err(Error::Capability(format!(
            "Sobol' dimension {k} exceeds the {MAX_DIMENSION} dimensions with direction numbers"
        )));
    }
    if n == 0 {
        return Err(Error::input("Sobol' point count must be at least 1"));
    }
    if n as u64 > 1u64 << BITS {
        return Err(Error::Capability(format!(
            "at most 2^{BITS} Sobol' points are supported, requested {n}"
        )));
    }

    let directions: Vec<[u32; BITS]> = (0..k).map(direction_integers).collect();
    let scrambles: Vec<Option<u32>> = (0..k)
        .map(|d| scramble.map(|key| dimension_seed(key, d)))
        .collect();

    let to_unit = |x: u32| x as f64 / (1u64 << BITS) as f64;
    let mut out = Vec::with_capacity(n * k);
    let mut state = vec![0u32; k];
    for i in 0..n {
        if i > 0 {
            let c = (i - 1).trailing_ones() as usize;
            for (s, v) in state.iter_mut().zip(&directions) {
                *s ^= v[c];
            }
        }
        for (s, scramble) in state.iter().zip(&scrambles) {
            let x = match scramble {
                Some(seed) => owen_scramble(*s, *seed),
                None => *s,
            };
            out.push(to_unit(x));
        }
    }
    Ok(out)
}

fn direction_integers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (b, vb) in v.iter_mut().enumerate() {
            *vb = 1 << (BITS - 1 - b);
        }
        return v;
    }
    let (degree, coeffs, m) = DIRECTION_NUMBERS[dim - 1];
    let s = degree as usize;
    for b in 0..s.min(BITS) {
        v[b] = m[b] << (BITS - 1 - b);
    }
    for b in s..BITS {
        let mut x = v[b - s] ^ (v[b - s] >> s);
        for j in 1..s {
            if (coeffs >> (s - 1 - j)) & 1 == 1 {
                x ^= v[b - j];
            }
        }
        v[b] = x;
    }
    v
}

fn dimension_seed(seed: u64, dim: usize) -> u32 {
    let mixed = splitmix64(seed ^ splitmix64(dim as u64 + 0x5851_f42d));
    (mixed >> 32) as u32 ^ mixed as u32
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Nested uniform scramble of a 32-bit digit expansion.
///
/// Works on the bit-reversed word, where "more significant digit" becomes
/// "lower bit"; each step below (xor with an even multiple, add, odd multiply)
/// only propagates information from low bits to high bits.
fn owen_scramble(x: u32, seed: u32) -> u32 {
    let mut r = x.reverse_bits();
    r ^= r.wrapping_mul(0x3d20_adea);
    r = r.wrapping_add(seed);
    r = r.wrapping_mul((seed >> 16) | 1);
    r ^= r.wrapping_mul(0x0552_6c56);
    r ^= r.wrapping_mul(0x53a2_2864);
    r.reverse_bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(points: &[f64], k: usize, d: usize) -> Vec<f64> {
        points.iter().skip(d).step_by(k).copied().collect()
    }

    fn one_per_bin(values: &[f64]) -> bool {
        let n = values.len();
        let mut hits = vec![0usize; n];
        for &v in values {
            hits[((v * n as f64).floor() as usize).min(n - 1)] += 1;
        }
        hits.iter().all(|&h| h == 1)
    }

    #[test]
    fn matches_reference_points() {
        // Unscrambled Joe-Kuo points in Gray-code order, dimensions 1,2,3,8,32,64.
        let reference: &[(usize, [f64; 6])] = &[
            (5, [0.875, 0.875, 0.125, 0.375, 0.625, 0.625]),
            (
                100,
                [
                    0.4140625, 0.2578125, 0.7734375, 0.4765625, 0.4140625, 0.6484375,
                ],
            ),
            (
                777,
                [
                    0.6923828125,
                    0.9365234375,
                    0.1630859375,
                    0.7626953125,
                    0.8994140625,
                    0.4267578125,
                ],
            ),
            (
                1023,
                [
                    0.0009765625,
                    0.7529296875,
                    0.6123046875,
                    0.6181640625,
                    0.6142578125,
                    0.0400390625,
                ],
            ),
        ];
        let pts = sobol_points(64, 1024, None).unwrap();
        for (row, expected) in reference {
            for (c, d) in [0usize, 1, 2, 7, 31, 63].into_iter().enumerate() {
                assert_eq!(pts[row * 64 + d], expected[c], "row {row} dim {d}");
            }
        }
    }

    #[test]
    fn one_dimensional_four_bins() {
        let pts = sobol_points(1, 4, None).unwrap();
        assert!(one_per_bin(&pts));
    }

    #[test]
    fn stratified_projections_scrambled_and_not() {
        for seed in [None, Some(0u64), Some(1), Some(12345)] {
            let k = 2;
            let pts = sobol_points(k, 256, seed).unwrap();
            for d in 0..k {
                assert!(one_per_bin(&column(&pts, k, d)), "seed {seed:?} dim {d}");
            }
        }
        let k = 64;
        let pts = sobol_points(k, 1024, Some(99)).unwrap();
        for d in 0..k {
            assert!(one_per_bin(&column(&pts, k, d)), "dim {d}");
        }
    }

    #[test]
    fn two_dimensional_net_property_survives_scrambling() {
        // Dimensions 1-2 form a (0, m, 2)-net: every 2^a x 2^(m-a) box holds one point.
        let m = 8;
        let n = 1usize << m;
        for seed in [None, Some(3u64)] {
            let pts = sobol_points(2, n, seed).unwrap();
            for a in 0..=m {
                let (bx, by) = (1usize << a, 1usize << (m - a));
                let mut hits = vec![0u8; n];
                for p in pts.chunks(2) {
                    let i = (p[0] * bx as f64) as usize;
                    let j = (p[1] * by as f64) as usize;
                    hits[i * by + j] += 1;
                }
                assert!(hits.iter().all(|&h| h == 1), "seed {seed:?} a {a}");
            }
        }
    }

    #[test]
    fn single_point_and_limits() {
        let p = sobol_points(3, 1, Some(42)).unwrap();
        assert_eq!(
            sobol_sequence(3, 8, 0).unwrap(),
            sobol_points(3, 8, None).unwrap()
        );
        assert_eq!(
            sobol_sequence(3, 8, 9).unwrap(),
            sobol_points(3, 8, Some(9)).unwrap()
        );
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
        assert!(matches!(
            sobol_points(65, 4, None),
            Err(Error::Capability(_))
        ));
        assert!(sobol_points(0, 4, None).is_err());
        assert!(sobol_points(2, 0, None).is_err());
    }

    #[test]
    fn seeds_change_points_deterministically() {
        let a = sobol_points(4, 64, Some(5)).unwrap();
        let b = sobol_points(4, 64, Some(5)).unwrap();
        let c = sobol_points(4, 64, Some(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Key 0 scrambles too.
        assert_ne!(
            sobol_points(4, 64, Some(0)).unwrap(),
            sobol_points(4, 64, None).unwrap()
        );
    }
}
