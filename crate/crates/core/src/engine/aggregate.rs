use std::collections::{HashMap, HashSet};

use super::cell::{compare, Cell};
use super::EngineError;
use crate::frontend::{AggFunc, Expr};
use crate::value::ColumnType;

/// Running state of one aggregate within one group.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregateState<'a> {
    Count(i64),
    /// Wraps on overflow.
    SumInt(Option<i64>),
    SumFloat(Option<f64>),
    AvgInt {
        sum: i128,
        count: i64,
    },
    AvgFloat {
        sum: f64,
        count: i64,
    },
    Min(Option<Cell<'a>>),
    Max(Option<Cell<'a>>),
    CountDistinct(HashSet<Cell<'a>>),
    /// First non-null value; used for values constant within a group (bin bounds).
    First(Option<Cell<'a>>),
}

impl<'a> AggregateState<'a> {
    /// The empty state of `func` over an input of type `input`.
    pub fn new(func: AggFunc, input: Option<ColumnType>) -> Self {
        let float = input == Some(ColumnType::Float32);
        match func {
            AggFunc::Count => AggregateState::Count(0),
            AggFunc::Sum if float => AggregateState::SumFloat(None),
            AggFunc::Sum => AggregateState::SumInt(None),
            AggFunc::Avg if float => AggregateState::AvgFloat { sum: 0.0, count: 0 },
            AggFunc::Avg => AggregateState::AvgInt { sum: 0, count: 0 },
            AggFunc::Min => AggregateState::Min(None),
            AggFunc::Max => AggregateState::Max(None),
            AggFunc::CountDistinct => AggregateState::CountDistinct(HashSet::new()),
        }
    }

    /// The state computing `e` inside an aggregator.
    pub fn for_expr(e: &Expr) -> Self {
        match e {
            Expr::Aggregate { func, arg } => Self::new(*func, arg.as_ref().map(|c| c.ty)),
            _ => AggregateState::First(None),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AggregateState::Count(_) => "COUNT",
            AggregateState::SumInt(_) | AggregateState::SumFloat(_) => "SUM",
            AggregateState::AvgInt { .. } | AggregateState::AvgFloat { .. } => "AVG",
            AggregateState::Min(_) => "MIN",
            AggregateState::Max(_) => "MAX",
            AggregateState::CountDistinct(_) => "COUNT DISTINCT",
            AggregateState::First(_) => "FIRST",
        }
    }

    /// Folds one input value in. NULL is skipped; `COUNT(*)` feeds a non-null marker.
    #[inline]
    pub fn update(&mut self, c: Cell<'a>) {
        if c.is_null() {
            return;
        }
        match self {
            AggregateState::Count(n) => *n += 1,
            AggregateState::SumInt(s) => {
                if let Cell::Int(v) = c {
                    *s = Some(s.unwrap_or(0).wrapping_add(v));
                }
            }
            AggregateState::SumFloat(s) => {
                if let Some(v) = c.as_f64() {
                    *s = Some(s.unwrap_or(0.0) + v);
                }
            }
            AggregateState::AvgInt { sum, count } => {
                if let Cell::Int(v) = c {
                    *sum += v as i128;
                    *count += 1;
                }
            }
            AggregateState::AvgFloat { sum, count } => {
                if let Some(v) = c.as_f64() {
                    *sum += v;
                    *count += 1;
                }
            }
            AggregateState::Min(m) => {
                if m.is_none_or(|cur| {
                    compare(c, cur) == Some(std::cmp::Ordering::Less)
                }) {
                    *m = Some(c);
                }
            }
            AggregateState::Max(m) => {
                if m.is_none_or(|cur| {
                    compare(c, cur) == Some(std::cmp::Ordering::Greater)
                }) {
                    *m = Some(c);
                }
            }
            AggregateState::CountDistinct(set) => {
                set.insert(c);
            }
            AggregateState::First(f) => {
                if f.is_none() {
                    *f = Some(c);
                }
            }
        }
    }

    /// Merges two partial states of the same aggregate.
    pub fn combine(self, other: Self) -> Result<Self, EngineError> {
        use AggregateState::*;
        Ok(match (self, other) {
            (Count(a), Count(b)) => Count(a + b),
            (SumInt(a), SumInt(b)) => SumInt(match (a, b) {
                (Some(x), Some(y)) => Some(x.wrapping_add(y)),
                (x, y) => x.or(y),
            }),
            (SumFloat(a), SumFloat(b)) => SumFloat(match (a, b) {
                (Some(x), Some(y)) => Some(x + y),
                (x, y) => x.or(y),
            }),
            (AvgInt { sum: s1, count: c1 }, AvgInt { sum: s2, count: c2 }) => AvgInt {
                sum: s1 + s2,
                count: c1 + c2,
            },
            (AvgFloat { sum: s1, count: c1 }, AvgFloat { sum: s2, count: c2 }) => AvgFloat {
                sum: s1 + s2,
                count: c1 + c2,
            },
            (Min(a), Min(b)) => {
                let mut m = Min(a);
                if let Some(v) = b {
                    m.update(v);
                }
                m
            }
            (Max(a), Max(b)) => {
                let mut m = Max(a);
                if let Some(v) = b {
                    m.update(v);
                }
                m
            }
            (CountDistinct(mut a), CountDistinct(b)) => {
                if a.len() < b.len() {
                    return CountDistinct(b).combine(CountDistinct(a));
                }
                a.extend(b);
                CountDistinct(a)
            }
            (First(a), First(b)) => First(a.or(b)),
            (a, b) => {
                return Err(EngineError::AggregateMismatch {
                    left: a.kind(),
                    right: b.kind(),
                })
            }
        })
    }

    /// The final value. Float results are narrowed to 32 bits here.
    pub fn finish(&self) -> Cell<'a> {
        match self {
            AggregateState::Count(n) => Cell::Int(*n),
            AggregateState::SumInt(s) => s.map_or(Cell::Null, Cell::Int),
            AggregateState::SumFloat(s) => s.map_or(Cell::Null, |v| Cell::Float(v as f32)),
            AggregateState::AvgInt { count: 0, .. } | AggregateState::AvgFloat { count: 0, .. } => {
                Cell::Null
            }
            AggregateState::AvgInt { sum, count } => {
                Cell::Float((*sum as f64 / *count as f64) as f32)
            }
            AggregateState::AvgFloat { sum, count } => Cell::Float((sum / *count as f64) as f32),
            AggregateState::Min(m) | AggregateState::Max(m) | AggregateState::First(m) => {
                m.unwrap_or(Cell::Null)
            }
            AggregateState::CountDistinct(s) => Cell::Int(s.len() as i64),
        }
    }
}

/// Hash aggregation table: groups in first-seen order.
#[derive(Debug, Clone)]
pub struct GroupTable<'a> {
    grouped: bool,
    template: Vec<AggregateState<'a>>,
    index: HashMap<Vec<Cell<'a>>, usize>,
    keys: Vec<Vec<Cell<'a>>>,
    states: Vec<Vec<AggregateState<'a>>>,
}

impl<'a> GroupTable<'a> {
    /// `grouped` is false for aggregation without GROUP BY, which always yields one row.
    pub fn new(grouped: bool, template: Vec<AggregateState<'a>>) -> Self {
        Self {
            grouped,
            template,
            index: HashMap::new(),
            keys: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The states of the group `key`, created on first sight.
    #[inline]
    pub fn group(&mut self, key: &[Cell<'a>]) -> &mut [AggregateState<'a>] {
        let i = if !self.grouped {
            if self.states.is_empty() {
                self.keys.push(Vec::new());
                self.states.push(self.template.clone());
            }
            0
        } else if let Some(&i) = self.index.get(key) {
            i
        } else {
            let i = self.states.len();
            self.index.insert(key.to_vec(), i);
            self.keys.push(key.to_vec());
            self.states.push(self.template.clone());
            i
        };
        &mut self.states[i]
    }

    pub fn combine(mut self, other: GroupTable<'a>) -> Result<Self, EngineError> {
        for (key, states) in other.keys.into_iter().zip(other.states) {
            let mine = self.group(&key);
            for (m, s) in mine.iter_mut().zip(states) {
                let cur = std::mem::replace(m, AggregateState::Count(0));
                *m = cur.combine(s)?;
            }
        }
        Ok(self)
    }

    /// Finished rows: key cells followed by aggregate results.
    pub fn rows(&self) -> Vec<Vec<Cell<'a>>> {
        if !self.grouped && self.states.is_empty() {
            return vec![self.template.iter().map(AggregateState::finish).collect()];
        }
        self.keys
            .iter()
            .zip(&self.states)
            .map(|(k, s)| {
                k.iter()
                    .copied()
                    .chain(s.iter().map(AggregateState::finish))
                    .collect()
            })
            .collect()
    }
}
