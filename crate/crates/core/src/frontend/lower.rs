use super::ast::{AstExpr, BinaryOp, Ident, Select, SelectItem};
use super::query::*;
use super::FrontendError;
use crate::storage::Catalog;
use crate::value::Value;

type LResult<T> = Result<T, FrontendError>;

/// Whether the statement can be answered entirely by the engine.
pub fn can_optimize_select(ast: &Select, catalog: &Catalog) -> bool {
    lower_to_query(ast, catalog).is_ok()
}

/// Resolves names and checks the statement against the catalog.
pub fn lower_to_query(ast: &Select, catalog: &Catalog) -> LResult<Query> {
    Lowerer { catalog }.select(ast)
}

struct Lowerer<'c> {
    catalog: &'c Catalog,
}

struct Scope<'q> {
    tables: &'q [String],
}

impl Lowerer<'_> {
    fn select(&self, ast: &Select) -> LResult<Query> {
        if ast.having.is_some() {
            return Err(FrontendError::Unsupported("HAVING".into()));
        }
        if ast.union.is_some() {
            return Err(FrontendError::Unsupported("UNION".into()));
        }
        let mut tables: Vec<String> = Vec::new();
        for t in &ast.from {
            if self.catalog.get(&t.name).is_none() {
                return Err(FrontendError::UnknownTable(t.name.clone()));
            }
            if tables.contains(&t.name) {
                return Err(FrontendError::DuplicateTable(t.name.clone()));
            }
            tables.push(t.name.clone());
        }
        let scope = Scope { tables: &tables };

        // Select list; BIN_MIN / BIN_MAX are patched once all BINs are known.
        let mut fields = Vec::new();
        for item in &ast.items {
            match item {
                SelectItem::Star(_) => {
                    for t in &tables {
                        let schema = self.catalog.get(t).unwrap().schema();
                        for c in &schema.columns {
                            fields.push(Field {
                                expr: Expr::Column(ColumnRef::new(t, &c.name, c.ty)),
                                name: c.name.clone(),
                            });
                        }
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let e = self.expr(expr, &scope)?;
                    let name = match (alias, expr) {
                        (Some(a), _) => a.name.clone(),
                        (None, AstExpr::Column { column, .. }) => column.name.clone(),
                        (None, e) => e.to_string(),
                    };
                    fields.push(Field { expr: e, name });
                }
            }
        }

        let mut group_by: Vec<Expr> = Vec::new();
        for g in &ast.group_by {
            let e = self.group_key(g, &tables, &fields)?;
            if !group_by.contains(&e) {
                group_by.push(e);
            }
        }

        let bins: Vec<Expr> = fields
            .iter()
            .map(|f| &f.expr)
            .chain(&group_by)
            .filter(|e| {
                matches!(
                    e,
                    Expr::Bin {
                        func: BinFunc::Bin,
                        ..
                    }
                )
            })
            .cloned()
            .collect();
        for f in fields.iter_mut() {
            resolve_bin_bound(&mut f.expr, &bins)?;
        }
        for g in group_by.iter_mut() {
            resolve_bin_bound(g, &bins)?;
        }
        let mut seen = Vec::new();
        group_by.retain(|g| {
            let fresh = !seen.contains(g);
            seen.push(g.clone());
            fresh
        });

        let mut order_by = Vec::new();
        for o in &ast.order_by {
            let mut e = self.order_key(&o.expr, &tables, &fields)?;
            resolve_bin_bound(&mut e, &bins)?;
            if !fields.iter().any(|f| f.expr == e) && !group_by.contains(&e) {
                return Err(FrontendError::OrderByNotSelected(o.expr.to_string()));
            }
            order_by.push(OrderKey {
                expr: e,
                desc: o.desc,
            });
        }

        let constraint = match &ast.selection {
            Some(w) => self.constraint(w, &scope)?,
            None => Constraint::True,
        };

        let query = Query {
            fields,
            constraint,
            tables,
            group_by,
            order_by,
            limit: ast.limit.as_ref().map(limit_value).transpose()?,
            offset: ast
                .offset
                .as_ref()
                .map(limit_value)
                .transpose()?
                .unwrap_or(0),
            distinct: ast.distinct,
        };
        check_grouping(&query)?;
        Ok(query)
    }

    fn column(
        &self,
        table: Option<&Ident>,
        column: &Ident,
        tables: &[String],
    ) -> LResult<ColumnRef> {
        match table {
            Some(t) => {
                if !tables.contains(&t.name) {
                    return Err(FrontendError::UnknownTable(t.name.clone()));
                }
                let schema = self.catalog.get(&t.name).unwrap().schema();
                let c = schema.column(&column.name).ok_or_else(|| {
                    FrontendError::UnknownColumn(format!("{}.{}", t.name, column.name))
                })?;
                Ok(ColumnRef::new(&t.name, &c.name, c.ty))
            }
            None => {
                let mut found = None;
                for t in tables {
                    if let Some(c) = self.catalog.get(t).unwrap().schema().column(&column.name) {
                        if found.is_some() {
                            return Err(FrontendError::Ambiguous(column.name.clone()));
                        }
                        found = Some(ColumnRef::new(t, &c.name, c.ty));
                    }
                }
                found.ok_or_else(|| FrontendError::UnknownColumn(column.name.clone()))
            }
        }
    }

    fn column_arg(&self, e: &AstExpr, scope: &Scope) -> LResult<ColumnRef> {
        match e {
            AstExpr::Column { table, column, .. } => {
                self.column(table.as_ref(), column, scope.tables)
            }
            other => Err(FrontendError::Unsupported(format!(
                "function argument {other} is not a column"
            ))),
        }
    }

    /// A select-list style expression: column, literal, aggregate or bin function.
    fn expr(&self, e: &AstExpr, scope: &Scope) -> LResult<Expr> {
        match e {
            AstExpr::Column { table, column, .. } => Ok(Expr::Column(self.column(
                table.as_ref(),
                column,
                scope.tables,
            )?)),
            AstExpr::Literal { value, .. } => Ok(Expr::Literal(value.clone())),
            AstExpr::Call {
                name,
                distinct,
                star,
                args,
                ..
            } => self.call(&name.name, *distinct, *star, args, scope),
            AstExpr::Subquery { .. } => Err(FrontendError::Unsupported("scalar subquery".into())),
            AstExpr::Binary { op, .. }
                if !op.is_comparison() && !matches!(op, BinaryOp::And | BinaryOp::Or) =>
            {
                Err(FrontendError::Unsupported(format!(
                    "arithmetic expression {e}"
                )))
            }
            AstExpr::Neg { .. } => Err(FrontendError::Unsupported(format!(
                "arithmetic expression {e}"
            ))),
            other => Err(FrontendError::Unsupported(format!(
                "expression {other} in this position"
            ))),
        }
    }

    fn call(
        &self,
        name: &str,
        distinct: bool,
        star: bool,
        args: &[AstExpr],
        scope: &Scope,
    ) -> LResult<Expr> {
        let upper = name.to_ascii_uppercase();
        let agg = match upper.as_str() {
            "SUM" => Some(AggFunc::Sum),
            "AVG" => Some(AggFunc::Avg),
            "MIN" => Some(AggFunc::Min),
            "MAX" => Some(AggFunc::Max),
            "COUNT" if distinct => Some(AggFunc::CountDistinct),
            "COUNT" => Some(AggFunc::Count),
            _ => None,
        };
        if distinct && agg != Some(AggFunc::CountDistinct) {
            return Err(FrontendError::Unsupported(format!("{upper}(DISTINCT ...)")));
        }
        if star && agg != Some(AggFunc::Count) {
            return Err(FrontendError::Unsupported(format!("{upper}(*)")));
        }
        if let Some(func) = agg {
            if star {
                return Ok(Expr::Aggregate { func, arg: None });
            }
            let [arg] = args else {
                return Err(FrontendError::Unsupported(format!(
                    "{upper} takes one argument"
                )));
            };
            if matches!(arg, AstExpr::Call { .. }) {
                return Err(FrontendError::Unsupported(format!(
                    "nested function in {upper}"
                )));
            }
            let c = self.column_arg(arg, scope)?;
            if matches!(func, AggFunc::Sum | AggFunc::Avg) && !c.ty.is_numeric() {
                return Err(FrontendError::TypeMismatch(format!(
                    "{upper} over {} column {c}",
                    c.ty
                )));
            }
            return Ok(Expr::Aggregate { func, arg: Some(c) });
        }
        let func = match upper.as_str() {
            "BIN" => BinFunc::Bin,
            "BIN_MIN" => BinFunc::BinMin,
            "BIN_MAX" => BinFunc::BinMax,
            _ => return Err(FrontendError::Unsupported(format!("function {name}"))),
        };
        let (col_arg, bins) = match (func, args) {
            (
                BinFunc::Bin,
                [c, AstExpr::Literal {
                    value: Value::Int64(n),
                    ..
                }],
            ) => {
                if *n < 1 || *n > u32::MAX as i64 {
                    return Err(FrontendError::InvalidBin(format!(
                        "bin count {n} must be a positive integer"
                    )));
                }
                (c, *n as u32)
            }
            (BinFunc::Bin, _) => {
                return Err(FrontendError::InvalidBin(
                    "BIN takes a column and a positive integer bin count".into(),
                ))
            }
            (_, [c]) => (c, 0),
            _ => {
                return Err(FrontendError::InvalidBin(format!(
                    "{} takes exactly one column",
                    func.name()
                )))
            }
        };
        if matches!(col_arg, AstExpr::Call { .. }) {
            return Err(FrontendError::Unsupported(format!(
                "nested function in {}",
                func.name()
            )));
        }
        let column = self.column_arg(col_arg, scope)?;
        if !column.ty.is_numeric() {
            return Err(FrontendError::InvalidBin(format!(
                "{} over non-numeric column {column}",
                func.name()
            )));
        }
        Ok(Expr::Bin { func, column, bins })
    }

    fn alias(&self, name: &str, fields: &[Field]) -> Option<Expr> {
        fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.expr.clone())
    }

    /// GROUP BY prefers a real column over a select alias.
    fn group_key(&self, e: &AstExpr, tables: &[String], fields: &[Field]) -> LResult<Expr> {
        let scope = Scope { tables };
        let out = match e {
            AstExpr::Column {
                table: None,
                column,
                ..
            } => match self.column(None, column, tables) {
                Ok(c) => Expr::Column(c),
                Err(FrontendError::UnknownColumn(_)) => self
                    .alias(&column.name, fields)
                    .ok_or_else(|| FrontendError::UnknownColumn(column.name.clone()))?,
                Err(err) => return Err(err),
            },
            AstExpr::Literal { .. } => {
                return Err(FrontendError::Unsupported(format!("GROUP BY literal {e}")))
            }
            other => self.expr(other, &scope)?,
        };
        if out.is_aggregate() {
            return Err(FrontendError::AggregateGrouping(format!(
                "aggregate {e} in GROUP BY"
            )));
        }
        Ok(out)
    }

    /// ORDER BY prefers a select alias over a column.
    fn order_key(&self, e: &AstExpr, tables: &[String], fields: &[Field]) -> LResult<Expr> {
        if let AstExpr::Column {
            table: None,
            column,
            ..
        } = e
        {
            if let Some(x) = self.alias(&column.name, fields) {
                return Ok(x);
            }
        }
        self.expr(e, &Scope { tables })
    }

    fn operand(&self, e: &AstExpr, scope: &Scope) -> LResult<Option<Operand>> {
        Ok(match e {
            AstExpr::Column { table, column, .. } => Some(Operand::Column(self.column(
                table.as_ref(),
                column,
                scope.tables,
            )?)),
            AstExpr::Literal { value, .. } => Some(Operand::Literal(value.clone())),
            _ => None,
        })
    }

    fn constraint(&self, e: &AstExpr, scope: &Scope) -> LResult<Constraint<Query>> {
        match e {
            AstExpr::Binary {
                op: BinaryOp::And,
                left,
                right,
                ..
            } => Ok(Constraint::and(vec![
                self.constraint(left, scope)?,
                self.constraint(right, scope)?,
            ])),
            AstExpr::Binary {
                op: BinaryOp::Or,
                left,
                right,
                ..
            } => Ok(Constraint::or(vec![
                self.constraint(left, scope)?,
                self.constraint(right, scope)?,
            ])),
            AstExpr::Not { expr, .. } => {
                Ok(Constraint::Not(Box::new(self.constraint(expr, scope)?)))
            }
            AstExpr::Binary {
                op, left, right, ..
            } if op.is_comparison() => {
                let op = cmp_op(*op);
                let l = self.operand(left, scope)?;
                let r = self.operand(right, scope)?;
                let (col, op, rhs) = match (l, r) {
                    (Some(Operand::Column(c)), Some(rhs)) => (c, op, rhs),
                    (Some(Operand::Literal(v)), Some(Operand::Column(c))) => {
                        (c, op.flip(), Operand::Literal(v))
                    }
                    _ => {
                        return Err(FrontendError::Unsupported(format!(
                            "predicate {e} must compare a column with a constant or a column"
                        )))
                    }
                };
                let rhs_ty = match &rhs {
                    Operand::Column(c) => Some(c.ty),
                    Operand::Literal(v) => v.column_type(),
                };
                if let Some(t) = rhs_ty {
                    if !col.ty.comparable_with(t) {
                        return Err(FrontendError::TypeMismatch(format!(
                            "cannot compare {} column {col} with {t} {rhs}",
                            col.ty
                        )));
                    }
                }
                Ok(Constraint::Compare {
                    left: col,
                    op,
                    right: rhs,
                })
            }
            AstExpr::InSubquery { expr, subquery, .. } => {
                let column = match self.operand(expr, scope)? {
                    Some(Operand::Column(c)) => c,
                    _ => {
                        return Err(FrontendError::Unsupported(format!(
                            "left side of IN must be a column: {expr}"
                        )))
                    }
                };
                let sub = self.select(subquery)?;
                if sub.fields.len() != 1 {
                    return Err(FrontendError::SubqueryArity(sub.fields.len()));
                }
                let t = sub.fields[0].expr.ty();
                if !column.ty.comparable_with(t) {
                    return Err(FrontendError::TypeMismatch(format!(
                        "cannot compare {} column {column} with subquery of {t}",
                        column.ty
                    )));
                }
                Ok(Constraint::In {
                    column,
                    subquery: Box::new(sub),
                })
            }
            AstExpr::Subquery { .. } => Err(FrontendError::Unsupported("scalar subquery".into())),
            AstExpr::Call { .. } => {
                Err(FrontendError::Unsupported(format!("function {e} in WHERE")))
            }
            other => Err(FrontendError::Unsupported(format!("predicate {other}"))),
        }
    }
}

fn cmp_op(op: BinaryOp) -> CmpOp {
    match op {
        BinaryOp::Eq => CmpOp::Eq,
        BinaryOp::Ne => CmpOp::Ne,
        BinaryOp::Lt => CmpOp::Lt,
        BinaryOp::Le => CmpOp::Le,
        BinaryOp::Gt => CmpOp::Gt,
        BinaryOp::Ge => CmpOp::Ge,
        _ => unreachable!("not a comparison"),
    }
}

fn limit_value(e: &AstExpr) -> LResult<u64> {
    match e {
        AstExpr::Literal {
            value: Value::Int64(v),
            ..
        } if *v >= 0 => Ok(*v as u64),
        other => Err(FrontendError::InvalidLimit(other.to_string())),
    }
}

/// Gives BIN_MIN / BIN_MAX the bin count of the BIN over the same column.
fn resolve_bin_bound(e: &mut Expr, bins: &[Expr]) -> LResult<()> {
    let label = e.to_string();
    let Expr::Bin {
        func: BinFunc::BinMin | BinFunc::BinMax,
        column,
        bins: n,
    } = e
    else {
        return Ok(());
    };
    let mut counts: Vec<u32> = bins
        .iter()
        .filter_map(|b| match b {
            Expr::Bin {
                column: c, bins, ..
            } if c == column => Some(*bins),
            _ => None,
        })
        .collect();
    counts.dedup();
    match counts.as_slice() {
        [one] => {
            *n = *one;
            Ok(())
        }
        [] => Err(FrontendError::InvalidBin(format!(
            "{label} needs a BIN over {column} in the select list"
        ))),
        _ => Err(FrontendError::InvalidBin(format!(
            "{label} is ambiguous: several BIN counts over {column}"
        ))),
    }
}

fn check_grouping(q: &Query) -> LResult<()> {
    let has_agg = q.fields.iter().any(|f| f.expr.is_aggregate());
    if q.distinct && has_agg {
        return Err(FrontendError::Unsupported(
            "DISTINCT together with aggregates".into(),
        ));
    }
    if q.distinct {
        if let Some(o) = q
            .order_by
            .iter()
            .find(|o| !q.fields.iter().any(|f| f.expr == o.expr))
        {
            return Err(FrontendError::OrderByNotSelected(format!(
                "{} (SELECT DISTINCT orders by selected columns only)",
                o.expr
            )));
        }
    }
    if !has_agg && q.group_by.is_empty() {
        return Ok(());
    }
    let grouped = |e: &Expr| {
        q.group_by.contains(e)
            || matches!(e, Expr::Literal(_))
            || match e {
                Expr::Bin {
                    func: BinFunc::BinMin | BinFunc::BinMax,
                    ..
                } => q.group_by.contains(&e.bin_governor().unwrap()),
                _ => false,
            }
    };
    for f in &q.fields {
        if !f.expr.is_aggregate() && !grouped(&f.expr) {
            return Err(FrontendError::AggregateGrouping(format!(
                "{} must appear in GROUP BY or be aggregated",
                f.expr
            )));
        }
    }
    for o in &q.order_by {
        if !o.expr.is_aggregate() && !grouped(&o.expr) {
            return Err(FrontendError::AggregateGrouping(format!(
                "ORDER BY {} must appear in GROUP BY or be aggregated",
                o.expr
            )));
        }
    }
    Ok(())
}
