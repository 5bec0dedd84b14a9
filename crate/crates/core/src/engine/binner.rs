/// Bounds resolved by the first binner phase: min and max of the non-null inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinBounds {
    pub lo: f64,
    pub hi: f64,
}

impl BinBounds {
    pub fn observe(bounds: &mut Option<BinBounds>, v: f64) {
        match bounds {
            None => *bounds = Some(BinBounds { lo: v, hi: v }),
            Some(b) => {
                b.lo = b.lo.min(v);
                b.hi = b.hi.max(v);
            }
        }
    }

    /// Lower edge of bin `i` as reported by `BIN_MIN`.
    pub fn edge(&self, i: u32, n: u32) -> f32 {
        if i >= n {
            return self.hi as f32;
        }
        (self.lo + i as f64 * (self.hi - self.lo) / n as f64) as f32
    }

    /// Bin number and its `[BIN_MIN, BIN_MAX)` edges for `v`.
    ///
    /// The arithmetic bin is nudged when rounding would put `v` outside the
    /// reported edges, so `BIN_MIN(i) <= v < BIN_MAX(i)` holds (`<=` for the last bin).
    /// A degenerate range puts everything in bin 0 with both edges at `lo`.
    pub fn assign(&self, v: f64, n: u32) -> (i64, f32, f32) {
        if self.hi <= self.lo {
            return (0, self.lo as f32, self.lo as f32);
        }
        let mut i = ((v - self.lo) * n as f64 / (self.hi - self.lo))
            .floor()
            .clamp(0.0, (n - 1) as f64) as u32;
        while i > 0 && v < self.edge(i, n) as f64 {
            i -= 1;
        }
        while i + 1 < n && v >= self.edge(i + 1, n) as f64 {
            i += 1;
        }
        (i as i64, self.edge(i, n), self.edge(i + 1, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundaries_and_clamp() {
        let b = BinBounds { lo: 0.0, hi: 10.0 };
        assert_eq!(b.assign(0.0, 10).0, 0);
        assert_eq!(b.assign(10.0, 10).0, 9);
        assert_eq!(b.assign(5.0, 10), (5, 5.0, 6.0));
    }

    #[test]
    fn small_histogram() {
        let mut bounds = None;
        for v in [1.0, 2.0, 3.0, 4.0] {
            BinBounds::observe(&mut bounds, v);
        }
        let b = bounds.unwrap();
        let bins: Vec<i64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&v| b.assign(v, 2).0)
            .collect();
        assert_eq!(bins, vec![0, 0, 1, 1]);
        assert_eq!(b.assign(3.0, 2).1, 2.5);
    }

    #[test]
    fn degenerate_range() {
        let b = BinBounds { lo: 7.0, hi: 7.0 };
        assert_eq!(b.assign(7.0, 3), (0, 7.0, 7.0));
    }

    proptest! {
        #[test]
        fn every_value_lands_between_its_edges(
            vals in prop::collection::vec(-1e6f32..1e6, 1..50),
            n in 1u32..40,
        ) {
            let mut bounds = None;
            for v in &vals {
                BinBounds::observe(&mut bounds, *v as f64);
            }
            let b = bounds.unwrap();
            prop_assume!(b.lo < b.hi);
            for v in &vals {
                let v = *v as f64;
                let (i, lo, hi) = b.assign(v, n);
                prop_assert!((0..n as i64).contains(&i));
                prop_assert!(lo as f64 <= v);
                if i + 1 == n as i64 {
                    prop_assert!(v <= hi as f64);
                } else {
                    prop_assert!(v < hi as f64);
                }
            }
        }
    }
}
