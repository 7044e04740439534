//! Binary instance masks and their column-major run-length encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A width×height bitmap stored as packed 64-bit words, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl BinaryMask {
    /// All-zero mask.
    pub fn new(width: u32, height: u32) -> Self {
        let bits = width as usize * height as usize;
        BinaryMask {
            width,
            height,
            words: vec![0u64; bits.div_ceil(64)],
        }
    }

    /// Build a mask from a per-pixel predicate.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn bit_index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = self.bit_index(x, y);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.bit_index(x, y);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Popcount of the pixelwise AND.
    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    /// Popcount of the pixelwise OR.
    pub fn union_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum())
    }

    /// Pixelwise XOR.
    pub fn xor(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    /// Pixelwise OR, in place.
    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Inclusive pixel bounding box `(x_min, y_min, x_max, y_max)`, or None when empty.
    pub fn tight_bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let mut x_min = u32::MAX;
        let mut y_min = u32::MAX;
        let mut x_max = 0u32;
        let mut y_max = 0u32;
        let mut any = false;
        for (x, y) in self.iter_set() {
            any = true;
            x_min = x_min.min(x);
            y_min = y_min.min(y);
            x_max = x_max.max(x);
            y_max = y_max.max(y);
        }
        any.then_some((x_min, y_min, x_max, y_max))
    }

    /// Mean of set-pixel centers `(i + 0.5, j + 0.5)`, or None when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0u64;
        for (x, y) in self.iter_set() {
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            n += 1;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Iterate over set pixel coordinates in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let idx = wi * 64 + tz;
                Some(((idx % w) as u32, (idx / w) as u32))
            })
        })
    }
}

/// Column-major run-length encoded mask.
///
/// `counts` alternate between zero-runs and one-runs, starting with the
/// zero-run (a leading 0 marks a mask that begins with set pixels). Pixels
/// are scanned down each column, left to right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

/// Run-length encode a mask in column-major order.
pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let (w, h) = (mask.width(), mask.height());
    let mut counts = Vec::new();
    let mut current = false; // encoding always starts with the zero-run
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = mask.get(x, y);
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    RleMask {
        width: w,
        height: h,
        counts,
    }
}

/// Decode a column-major run-length encoding back to a bitmap.
pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask> {
    let total = rle.width as u64 * rle.height as u64;
    let sum: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if sum != total {
        return Err(Error::InvalidRle(format!(
            "counts sum to {sum}, expected {}x{} = {total}",
            rle.width, rle.height
        )));
    }
    for (i, &c) in rle.counts.iter().enumerate() {
        if c == 0 && i != 0 {
            return Err(Error::InvalidRle(format!(
                "zero-length run at interior position {i}"
            )));
        }
    }
    let mut mask = BinaryMask::new(rle.width, rle.height);
    let h = rle.height as u64;
    let mut pos = 0u64;
    let mut value = false;
    for &c in &rle.counts {
        if value {
            for k in pos..pos + c as u64 {
                mask.set((k / h) as u32, (k % h) as u32, true);
            }
        }
        pos += c as u64;
        value = !value;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn area_and_bbox() {
        let mut m = BinaryMask::new(10, 8);
        m.set(2, 3, true);
        m.set(5, 6, true);
        assert_eq!(m.area(), 2);
        assert_eq!(m.tight_bbox(), Some((2, 3, 5, 6)));
        assert_eq!(BinaryMask::new(4, 4).tight_bbox(), None);
    }

    #[test]
    fn centroid_of_single_pixel() {
        let mut m = BinaryMask::new(10, 10);
        m.set(3, 7, true);
        assert_eq!(m.centroid(), Some((3.5, 7.5)));
    }

    #[test]
    fn set_ops_against_naive_popcounts() {
        let a = BinaryMask::from_fn(33, 9, |x, y| (x + y) % 3 == 0);
        let b = BinaryMask::from_fn(33, 9, |x, y| (x * y) % 4 == 1);
        let mut inter = 0u64;
        let mut union = 0u64;
        for y in 0..9 {
            for x in 0..33 {
                let (va, vb) = (a.get(x, y), b.get(x, y));
                inter += (va && vb) as u64;
                union += (va || vb) as u64;
            }
        }
        assert_eq!(a.intersection_area(&b).unwrap(), inter);
        assert_eq!(a.union_area(&b).unwrap(), union);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = BinaryMask::new(4, 4);
        let b = BinaryMask::new(4, 5);
        assert!(matches!(
            a.intersection_area(&b),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn iter_set_matches_get() {
        let m = BinaryMask::from_fn(70, 3, |x, y| x % 7 == y);
        let listed: Vec<_> = m.iter_set().collect();
        let mut expected = Vec::new();
        for y in 0..3 {
            for x in 0..70 {
                if m.get(x, y) {
                    expected.push((x, y));
                }
            }
        }
        assert_eq!(listed, expected);
    }

    #[test]
    fn rle_all_zero_and_all_one() {
        let zero = BinaryMask::new(480, 480);
        assert_eq!(rle_encode(&zero).counts, vec![230400]);
        let one = BinaryMask::from_fn(480, 480, |_, _| true);
        assert_eq!(rle_encode(&one).counts, vec![0, 230400]);
    }

    #[test]
    fn rle_is_column_major() {
        // Single set pixel at (x=2, y=1) on 4x3: column-major index 2*3+1 = 7.
        let mut m = BinaryMask::new(4, 3);
        m.set(2, 1, true);
        assert_eq!(rle_encode(&m).counts, vec![7, 1, 4]);
    }

    #[test]
    fn rle_decode_validates_sum_and_interior_zeros() {
        let bad_sum = RleMask {
            width: 4,
            height: 3,
            counts: vec![5, 5],
        };
        assert!(matches!(rle_decode(&bad_sum), Err(Error::InvalidRle(_))));
        let interior_zero = RleMask {
            width: 4,
            height: 3,
            counts: vec![5, 0, 7],
        };
        assert!(matches!(
            rle_decode(&interior_zero),
            Err(Error::InvalidRle(_))
        ));
        let leading_zero = RleMask {
            width: 4,
            height: 3,
            counts: vec![0, 12],
        };
        assert!(rle_decode(&leading_zero).is_ok());
    }

    #[test]
    fn rle_round_trip_exhaustive_3x3() {
        // All 512 masks on a 3x3 grid.
        for bits in 0u32..512 {
            let m = BinaryMask::from_fn(3, 3, |x, y| (bits >> (y * 3 + x)) & 1 == 1);
            let back = rle_decode(&rle_encode(&m)).unwrap();
            assert_eq!(back, m, "mask pattern {bits:#011b}");
        }
    }

    proptest! {
        #[test]
        fn rle_round_trip_random(seed in any::<u64>(), w in 1u32..80, h in 1u32..80) {
            let mut state = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                // xorshift64
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state & 1 == 1
            });
            let back = rle_decode(&rle_encode(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
