use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use crate::value::{cmp_int_float, ColumnType, Value};

/// A register value. Integers of every width (and booleans) widen to `Int`;
/// strings borrow from the column region they were read from.
#[derive(Debug, Clone, Copy, Default)]
pub enum Cell<'a> {
    #[default]
    Null,
    Int(i64),
    Float(f32),
    Str(&'a str),
}

/// Register index inside a [`QueryContext`](super::QueryContext).
pub type Reg = usize;

fn float_bits(v: f32) -> u32 {
    if v.is_nan() {
        f32::NAN.to_bits()
    } else if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

impl<'a> Cell<'a> {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn from_value(v: &'a Value) -> Cell<'a> {
        match v {
            Value::Null => Cell::Null,
            Value::Float32(f) => Cell::Float(*f),
            Value::Str(s) => Cell::Str(s),
            other => other.as_i64().map_or(Cell::Null, Cell::Int),
        }
    }

    /// Converts to a `Value` of the declared output type.
    pub fn to_value(&self, ty: ColumnType) -> Value {
        match (*self, ty) {
            (Cell::Null, _) => Value::Null,
            (Cell::Str(s), _) => Value::Str(s.to_owned()),
            (Cell::Float(f), ColumnType::Float32) => Value::Float32(f),
            (Cell::Int(i), ColumnType::Float32) => Value::Float32(i as f32),
            (Cell::Float(f), _) => Value::Float32(f),
            (Cell::Int(i), ColumnType::Bool) => Value::Bool(i != 0),
            (Cell::Int(i), ColumnType::Int8) => Value::Int8(i as i8),
            (Cell::Int(i), ColumnType::Int16) => Value::Int16(i as i16),
            (Cell::Int(i), ColumnType::Int32) => Value::Int32(i as i32),
            (Cell::Int(i), _) => Value::Int64(i),
        }
    }
}

/// SQL comparison: `None` when either side is NULL or the kinds are incomparable.
pub fn compare(a: Cell<'_>, b: Cell<'_>) -> Option<Ordering> {
    match (a, b) {
        (Cell::Int(x), Cell::Int(y)) => Some(x.cmp(&y)),
        (Cell::Float(x), Cell::Float(y)) => x.partial_cmp(&y),
        (Cell::Int(x), Cell::Float(y)) => Some(cmp_int_float(x, y as f64)),
        (Cell::Float(x), Cell::Int(y)) => Some(cmp_int_float(y, x as f64).reverse()),
        (Cell::Str(x), Cell::Str(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Total order used by SORT and merge joins: NULL first, then by [`compare`].
pub fn order(a: Cell<'_>, b: Cell<'_>) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => compare(a, b).unwrap_or(Ordering::Equal),
    }
}

/// Grouping equality: NULL equals NULL and all NaNs collapse.
impl PartialEq for Cell<'_> {
    fn eq(&self, other: &Self) -> bool {
        match (*self, *other) {
            (Cell::Null, Cell::Null) => true,
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (Cell::Float(a), Cell::Float(b)) => float_bits(a) == float_bits(b),
            (Cell::Str(a), Cell::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Cell<'_> {}

impl Hash for Cell<'_> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match *self {
            Cell::Null => state.write_u8(0),
            Cell::Int(v) => {
                state.write_u8(1);
                v.hash(state)
            }
            Cell::Float(v) => {
                state.write_u8(2);
                float_bits(v).hash(state)
            }
            Cell::Str(s) => {
                state.write_u8(3);
                s.hash(state)
            }
        }
    }
}
