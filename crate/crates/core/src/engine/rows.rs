use std::collections::HashSet;

use super::cell::{Cell, Reg};

/// Rows materialized by a pipeline breaker, stored flat.
#[derive(Debug, Clone, Default)]
pub struct RowBuffer<'a> {
    width: usize,
    len: usize,
    cells: Vec<Cell<'a>>,
}

impl<'a> RowBuffer<'a> {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            len: 0,
            cells: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn push_from(&mut self, regs: &[Cell<'a>], from: &[Reg]) {
        self.cells.extend(from.iter().map(|&r| regs[r]));
        self.len += 1;
    }

    pub fn push_row(&mut self, row: &[Cell<'a>]) {
        debug_assert_eq!(row.len(), self.width);
        self.cells.extend_from_slice(row);
        self.len += 1;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[Cell<'a>] {
        &self.cells[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn load_into(&self, i: usize, regs: &mut [Cell<'a>], to: &[Reg]) {
        for (&r, &c) in to.iter().zip(self.row(i)) {
            regs[r] = c;
        }
    }

    /// Reorders rows by `perm` (new position -> old position).
    pub fn permute(&mut self, perm: &[usize]) {
        let mut cells = Vec::with_capacity(self.cells.len());
        for &i in perm {
            cells.extend_from_slice(self.row(i));
        }
        self.len = perm.len();
        self.cells = cells;
    }
}

/// Materialized result of an IN subquery. NULLs are never members.
#[derive(Debug, Clone, Default)]
pub struct InSet<'a> {
    ints: HashSet<i64>,
    floats: HashSet<u32>,
    strs: HashSet<&'a str>,
}

fn float_key(v: f32) -> u32 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

impl<'a> InSet<'a> {
    pub fn insert(&mut self, c: Cell<'a>) {
        match c {
            Cell::Null => {}
            Cell::Int(v) => {
                self.ints.insert(v);
            }
            Cell::Float(v) => {
                if !v.is_nan() {
                    self.floats.insert(float_key(v));
                }
            }
            Cell::Str(s) => {
                self.strs.insert(s);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.ints.len() + self.floats.len() + self.strs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership under numeric equality: `3` matches `3.0`.
    pub fn contains(&self, c: Cell<'_>) -> bool {
        match c {
            Cell::Null => false,
            Cell::Int(v) => {
                self.ints.contains(&v) || {
                    let f = v as f32;
                    !self.floats.is_empty()
                        && crate::value::cmp_int_float(v, f as f64).is_eq()
                        && self.floats.contains(&float_key(f))
                }
            }
            Cell::Float(v) => {
                self.floats.contains(&float_key(v))
                    || (!self.ints.is_empty()
                        && v.fract() == 0.0
                        && (v as f64) >= -9.223_372_036_854_776e18
                        && (v as f64) < 9.223_372_036_854_776e18
                        && self.ints.contains(&(v as i64)))
            }
            Cell::Str(s) => self.strs.contains(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let mut s = InSet::default();
        for c in [Cell::Int(1), Cell::Int(5), Cell::Null] {
            s.insert(c);
        }
        assert!(s.contains(Cell::Int(5)));
        assert!(s.contains(Cell::Float(5.0)));
        assert!(!s.contains(Cell::Float(5.5)));
        assert!(!s.contains(Cell::Null));
        let mut f = InSet::default();
        f.insert(Cell::Float(16777216.0));
        assert!(f.contains(Cell::Int(16777216)));
        assert!(!f.contains(Cell::Int(16777217)));
    }

    #[test]
    fn buffer_roundtrip() {
        let mut b = RowBuffer::new(2);
        b.push_from(&[Cell::Int(1), Cell::Str("x"), Cell::Int(9)], &[0, 1]);
        b.push_from(&[Cell::Int(2), Cell::Null, Cell::Int(9)], &[0, 1]);
        b.permute(&[1, 0]);
        let mut regs = [Cell::Null; 3];
        b.load_into(0, &mut regs, &[2, 0]);
        assert_eq!(regs, [Cell::Null, Cell::Null, Cell::Int(2)]);
        assert_eq!(b.len(), 2);
    }
}
