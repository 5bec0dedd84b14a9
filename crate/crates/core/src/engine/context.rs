use std::collections::{HashMap, VecDeque};

use super::aggregate::GroupTable;
use super::binner::BinBounds;
use super::cell::{Cell, Reg};
use super::rows::RowBuffer;
use crate::value::{ColumnType, Value};

/// Handle to a registered context variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

/// The value kinds operators keep in context variables.
#[derive(Debug, Clone)]
pub enum VarValue<'a> {
    Counter(u64),
    Groups(GroupTable<'a>),
    Rows(RowBuffer<'a>),
    Bounds(Vec<Option<BinBounds>>),
}

impl VarValue<'_> {
    pub fn type_name(&self) -> &'static str {
        match self {
            VarValue::Counter(_) => "counter",
            VarValue::Groups(_) => "groups",
            VarValue::Rows(_) => "rows",
            VarValue::Bounds(_) => "bounds",
        }
    }
}

/// Types storable in a context variable.
pub trait ContextValue<'a>: Sized {
    fn wrap(self) -> VarValue<'a>;
    fn peek<'v>(v: &'v VarValue<'a>) -> Option<&'v Self>;
    fn peek_mut<'v>(v: &'v mut VarValue<'a>) -> Option<&'v mut Self>;
}

macro_rules! context_value {
    ($t:ty, $variant:ident) => {
        impl<'a> ContextValue<'a> for $t {
            fn wrap(self) -> VarValue<'a> {
                VarValue::$variant(self)
            }
            fn peek<'v>(v: &'v VarValue<'a>) -> Option<&'v Self> {
                match v {
                    VarValue::$variant(x) => Some(x),
                    _ => None,
                }
            }
            fn peek_mut<'v>(v: &'v mut VarValue<'a>) -> Option<&'v mut Self> {
                match v {
                    VarValue::$variant(x) => Some(x),
                    _ => None,
                }
            }
        }
    };
}

context_value!(u64, Counter);
context_value!(GroupTable<'a>, Groups);
context_value!(RowBuffer<'a>, Rows);
context_value!(Vec<Option<BinBounds>>, Bounds);

struct ContextVar<'a> {
    name: String,
    initial: VarValue<'a>,
    value: VarValue<'a>,
}

/// Execution state of one query (or one parallel lane): the register file
/// and the named variables operators registered while being compiled.
pub struct QueryContext<'a> {
    pub(crate) regs: Vec<Cell<'a>>,
    vars: Vec<ContextVar<'a>>,
    names: HashMap<String, usize>,
    prefixes: HashMap<&'static str, usize>,
    /// Set by the result sink once a row is buffered; sources stop at the next row boundary.
    pub(crate) pause: bool,
    pub(crate) out: VecDeque<Cell<'a>>,
}

impl Default for QueryContext<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> QueryContext<'a> {
    pub fn new() -> Self {
        Self {
            regs: Vec::new(),
            vars: Vec::new(),
            names: HashMap::new(),
            prefixes: HashMap::new(),
            pause: false,
            out: VecDeque::new(),
        }
    }

    pub(crate) fn alloc_reg(&mut self) -> Reg {
        self.regs.push(Cell::Null);
        self.regs.len() - 1
    }

    pub fn register_count(&self) -> usize {
        self.regs.len()
    }

    /// A unique variable prefix for an operator: `Limit`, then `Limit#2`, ...
    pub(crate) fn prefix(&mut self, op: &'static str) -> String {
        let n = self.prefixes.entry(op).or_insert(0);
        *n += 1;
        if *n == 1 {
            op.to_string()
        } else {
            format!("{op}#{n}")
        }
    }

    /// Registers a variable under a qualified name, e.g. `Limit.currentPosition`.
    ///
    /// # Panics
    /// If the name is already registered.
    pub fn register<T: ContextValue<'a>>(&mut self, name: impl Into<String>, initial: T) -> VarId {
        let name = name.into();
        assert!(
            !self.names.contains_key(&name),
            "context variable {name} registered twice"
        );
        self.names.insert(name.clone(), self.vars.len());
        let initial = initial.wrap();
        self.vars.push(ContextVar {
            name,
            value: initial.clone(),
            initial,
        });
        VarId(self.vars.len() - 1)
    }

    /// Registered variables as (name, kind) pairs, in registration order.
    pub fn variables(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.vars
            .iter()
            .map(|v| (v.name.as_str(), v.initial.type_name()))
    }

    pub fn initial_value(&self, name: &str) -> Option<&VarValue<'a>> {
        Some(&self.vars[*self.names.get(name)?].initial)
    }

    pub fn get<T: ContextValue<'a>>(&self, name: &str) -> Option<&T> {
        T::peek(&self.vars[*self.names.get(name)?].value)
    }

    pub(crate) fn var<T: ContextValue<'a>>(&self, id: VarId) -> &T {
        T::peek(&self.vars[id.0].value).expect("context variable kind")
    }

    pub(crate) fn var_mut<T: ContextValue<'a>>(&mut self, id: VarId) -> &mut T {
        T::peek_mut(&mut self.vars[id.0].value).expect("context variable kind")
    }

    pub(crate) fn regs_and_var<T: ContextValue<'a>>(
        &mut self,
        id: VarId,
    ) -> (&mut [Cell<'a>], &mut T) {
        let v = T::peek_mut(&mut self.vars[id.0].value).expect("context variable kind");
        (&mut self.regs, v)
    }
}

/// One column of the current result row.
#[derive(Debug, Clone)]
pub struct OutputSlot<'a> {
    pub name: String,
    pub ty: ColumnType,
    pub cell: Cell<'a>,
}

impl OutputSlot<'_> {
    pub fn is_null(&self) -> bool {
        self.cell.is_null()
    }

    pub fn value(&self) -> Value {
        self.cell.to_value(self.ty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_are_named_and_typed() {
        let mut ctx = QueryContext::new();
        let p = ctx.prefix("Limit");
        let id = ctx.register(format!("{p}.currentPosition"), 0u64);
        *ctx.var_mut::<u64>(id) += 2;
        assert_eq!(ctx.get::<u64>("Limit.currentPosition"), Some(&2));
        assert!(matches!(
            ctx.initial_value("Limit.currentPosition"),
            Some(VarValue::Counter(0))
        ));
        assert_eq!(ctx.prefix("Limit"), "Limit#2");
        assert_eq!(
            ctx.variables().next(),
            Some(("Limit.currentPosition", "counter"))
        );
        assert!(ctx.get::<RowBuffer>("Limit.currentPosition").is_none());
    }

    #[test]
    #[should_panic(expected = "registered twice")]
    fn duplicate_names_rejected() {
        let mut ctx = QueryContext::new();
        ctx.register("a", 1u64);
        ctx.register("a", 1u64);
    }
}
