//! Parse tree for SELECT statements. `Display` prints valid SQL that parses back
//! to the same tree.

use std::fmt;

use crate::value::{float_literal, Value};

/// Source location of a node. Spans never take part in equality, so trees
/// parsed from differently formatted text compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span {
            end: other.end,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
            _ => 4,
        }
    }
}

const NOT_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstExpr {
    Column {
        table: Option<Ident>,
        column: Ident,
        span: Span,
    },
    Literal {
        value: Value,
        span: Span,
    },
    /// Function call; `star` for `COUNT(*)`, `distinct` for `COUNT(DISTINCT x)`.
    Call {
        name: Ident,
        distinct: bool,
        star: bool,
        args: Vec<AstExpr>,
        span: Span,
    },
    Binary {
        op: BinaryOp,
        left: Box<AstExpr>,
        right: Box<AstExpr>,
        span: Span,
    },
    Not {
        expr: Box<AstExpr>,
        span: Span,
    },
    Neg {
        expr: Box<AstExpr>,
        span: Span,
    },
    InSubquery {
        expr: Box<AstExpr>,
        subquery: Box<Select>,
        span: Span,
    },
    Subquery {
        select: Box<Select>,
        span: Span,
    },
}

impl AstExpr {
    pub fn span(&self) -> Span {
        match self {
            AstExpr::Column { span, .. }
            | AstExpr::Literal { span, .. }
            | AstExpr::Call { span, .. }
            | AstExpr::Binary { span, .. }
            | AstExpr::Not { span, .. }
            | AstExpr::Neg { span, .. }
            | AstExpr::InSubquery { span, .. }
            | AstExpr::Subquery { span, .. } => *span,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            AstExpr::Binary { op, .. } => op.precedence(),
            AstExpr::Not { .. } => NOT_PRECEDENCE,
            AstExpr::InSubquery { .. } => 4,
            _ => ATOM_PRECEDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    Star(Span),
    Expr { expr: AstExpr, alias: Option<Ident> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: AstExpr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<Ident>,
    pub selection: Option<AstExpr>,
    pub group_by: Vec<AstExpr>,
    pub having: Option<AstExpr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<AstExpr>,
    pub offset: Option<AstExpr>,
    pub union: Option<Box<Select>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Select(Select),
    Explain(Select),
}

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if crate::storage::is_identifier(name) && !super::lexer::is_reserved(name) {
        f.write_str(name)
    } else {
        write!(f, "\"{}\"", name.replace('"', "\"\""))
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_ident(f, &self.name)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &AstExpr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for AstExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AstExpr::Column { table, column, .. } => {
                if let Some(t) = table {
                    write!(f, "{t}.")?;
                }
                write!(f, "{column}")
            }
            AstExpr::Literal { value, .. } => match value {
                Value::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
                Value::Float32(v) => f.write_str(&float_literal(*v)),
                v => f.write_str(&v.to_sql()),
            },
            AstExpr::Call {
                name,
                distinct,
                star,
                args,
                ..
            } => {
                write!(f, "{name}(")?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                if *star {
                    f.write_str("*")?;
                }
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            AstExpr::Binary {
                op, left, right, ..
            } => {
                let p = op.precedence();
                let cmp = op.is_comparison();
                write_child(
                    f,
                    left,
                    left.precedence() < p || (cmp && left.precedence() == p),
                )?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, right, right.precedence() <= p)
            }
            AstExpr::Not { expr, .. } => {
                f.write_str("NOT ")?;
                write_child(f, expr, expr.precedence() < NOT_PRECEDENCE)
            }
            AstExpr::Neg { expr, .. } => write!(f, "-({expr})"),
            AstExpr::InSubquery { expr, subquery, .. } => {
                write_child(f, expr, expr.precedence() <= 4)?;
                write!(f, " IN ({subquery})")
            }
            AstExpr::Subquery { select, .. } => write!(f, "({select})"),
        }
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Star(_) => f.write_str("*"),
            SelectItem::Expr { expr, alias } => {
                write!(f, "{expr}")?;
                if let Some(a) = alias {
                    write!(f, " AS {a}")?;
                }
                Ok(())
            }
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

impl fmt::Display for OrderItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.expr, if self.desc { " DESC" } else { "" })
    }
}

impl fmt::Display for Select {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        write_list(f, &self.items)?;
        f.write_str(" FROM ")?;
        write_list(f, &self.from)?;
        if let Some(w) = &self.selection {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            write_list(f, &self.group_by)?;
        }
        if let Some(h) = &self.having {
            write!(f, " HAVING {h}")?;
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            write_list(f, &self.order_by)?;
        }
        if let Some(l) = &self.limit {
            write!(f, " LIMIT {l}")?;
        }
        if let Some(o) = &self.offset {
            write!(f, " OFFSET {o}")?;
        }
        if let Some(u) = &self.union {
            write!(f, " UNION {u}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Select(s) => write!(f, "{s}"),
            Statement::Explain(s) => write!(f, "EXPLAIN QUERY PLAN {s}"),
        }
    }
}
