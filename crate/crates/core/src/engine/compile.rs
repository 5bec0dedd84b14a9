//! Lowering of a plan into fused produce/consume closures.
//!
//! Every operator is compiled against a continuation that builds its parent's
//! consumer, so a pipeline becomes one loop in its source with the operators
//! above nested inside it. Pipeline breakers materialize into context
//! variables and become the source of the pipeline above them.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use super::aggregate::{AggregateState, GroupTable};
use super::binner::BinBounds;
use super::cell::{compare, order, Cell, Reg};
use super::context::{OutputSlot, QueryContext, VarId};
use super::cursor::CompiledQuery;
use super::rows::{InSet, RowBuffer};
use super::{EngineError, Result};
use crate::frontend::{BinFunc, ColumnRef, Constraint, Expr, OrderKey};
use crate::planner::{ordering, BinSpec, Operator, PlanNode, PlanRange, QueryPlan};
use crate::storage::{Catalog, Column, ColumnData, Table};
use crate::value::{cmp_int_float, Value};

pub(crate) enum Flow {
    Continue,
    Stop,
}

pub(crate) enum Status {
    Paused,
    Done,
}

pub(crate) type Consumer<'a> = Box<dyn FnMut(&mut QueryContext<'a>) -> Result<Flow> + Send + 'a>;
pub(crate) type Producer<'a> = Box<dyn FnMut(&mut QueryContext<'a>) -> Result<Status> + Send + 'a>;
pub(crate) type Job<'a> = Box<dyn FnMut() -> Result<()> + Send + 'a>;
type Loader<'a> = Box<dyn Fn(&mut [Cell<'a>], usize) + Send + Sync + 'a>;
type Pred<'a> = Box<dyn Fn(&[Cell<'a>]) -> Option<bool> + Send + Sync + 'a>;

/// Where DEBUG operators write their rows.
pub type DebugSink = Arc<Mutex<Box<dyn Write + Send>>>;

pub fn stderr_sink() -> DebugSink {
    Arc::new(Mutex::new(Box::new(std::io::stderr())))
}

/// Which register holds each expression a node outputs.
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout(Vec<(Expr, Reg)>);

impl Layout {
    fn push(&mut self, e: Expr, r: Reg) {
        if !self.0.iter().any(|(x, _)| *x == e) {
            self.0.push((e, r));
        }
    }

    fn reg(&self, e: &Expr) -> Result<Reg> {
        self.0
            .iter()
            .find(|(x, _)| x == e)
            .map(|(_, r)| *r)
            .ok_or_else(|| EngineError::Internal(format!("{e} is not computed below its use")))
    }

    fn position(&self, e: &Expr) -> Result<usize> {
        self.0
            .iter()
            .position(|(x, _)| x == e)
            .ok_or_else(|| EngineError::Internal(format!("{e} is not computed below its use")))
    }

    fn regs(&self) -> Vec<Reg> {
        self.0.iter().map(|(_, r)| *r).collect()
    }

    fn concat(&self, other: &Layout) -> Layout {
        let mut out = self.clone();
        for (e, r) in &other.0 {
            out.push(e.clone(), *r);
        }
        out
    }
}

pub(crate) struct Scope<'a> {
    ctx: QueryContext<'a>,
    /// Lane `i` of `n`: the scan of this scope reads only its share of the rows.
    chunk: Option<(usize, usize)>,
}

impl Scope<'_> {
    fn new(chunk: Option<(usize, usize)>) -> Self {
        Self {
            ctx: QueryContext::new(),
            chunk,
        }
    }
}

type InSlot<'a> = Arc<OnceLock<InSet<'a>>>;
type BoundsSlot = Arc<OnceLock<Vec<Option<BinBounds>>>>;

type Cont<'k, 'a> =
    &'k mut dyn FnMut(&mut Compiler<'a>, &mut Scope<'a>, &Layout) -> Result<Consumer<'a>>;

pub(crate) struct Compiler<'a> {
    catalog: &'a Catalog,
    max_lanes: usize,
    debug: DebugSink,
    /// Work run once by `init`: IN subqueries and the first binner phase.
    jobs: Vec<Job<'a>>,
    in_slots: HashMap<usize, InSlot<'a>>,
    bin_slots: HashMap<usize, BoundsSlot>,
}

enum Src<'a> {
    Reg(Reg),
    Const(Cell<'a>),
}

/// Compiles `plan` into a query whose parallel aggregations use at most `lanes` threads.
pub fn compile<'a>(
    plan: &'a QueryPlan,
    catalog: &'a Catalog,
    lanes: usize,
) -> Result<CompiledQuery<'a>> {
    compile_with_debug(plan, catalog, lanes, stderr_sink())
}

pub fn compile_with_debug<'a>(
    plan: &'a QueryPlan,
    catalog: &'a Catalog,
    lanes: usize,
    debug: DebugSink,
) -> Result<CompiledQuery<'a>> {
    let mut c = Compiler {
        catalog,
        max_lanes: lanes.max(1),
        debug,
        jobs: Vec::new(),
        in_slots: HashMap::new(),
        bin_slots: HashMap::new(),
    };
    let mut s = Scope::new(None);
    let fields = &plan.fields;
    let producer = c.node(&mut s, &plan.root, &mut |_, _, layout| {
        let srcs = fields
            .iter()
            .map(|f| match &f.expr {
                Expr::Literal(v) => Ok(Src::Const(Cell::from_value(v))),
                e => layout.reg(e).map(Src::Reg),
            })
            .collect::<Result<Vec<_>>>()?;
        let sink: Consumer<'a> = Box::new(move |ctx| {
            for s in &srcs {
                let v = match *s {
                    Src::Reg(r) => ctx.regs[r],
                    Src::Const(c) => c,
                };
                ctx.out.push_back(v);
            }
            ctx.pause = true;
            Ok(Flow::Continue)
        });
        Ok(sink)
    })?;
    let slots = fields
        .iter()
        .map(|f| OutputSlot {
            name: f.name.clone(),
            ty: f.expr.ty(),
            cell: Cell::Null,
        })
        .collect();
    Ok(CompiledQuery::new(s.ctx, producer, c.jobs, slots))
}

/// Drives a producer until it is exhausted.
fn run_to_end<'a>(p: &mut Producer<'a>, ctx: &mut QueryContext<'a>) -> Result<()> {
    while let Status::Paused = p(ctx)? {}
    Ok(())
}

/// Pushes buffered rows into `parent`, stopping at a row boundary when paused.
fn emit<'a>(
    ctx: &mut QueryContext<'a>,
    rows: &RowBuffer<'a>,
    regs: &[Reg],
    pos: &mut usize,
    parent: &mut Consumer<'a>,
) -> Result<Status> {
    while *pos < rows.len() {
        rows.load_into(*pos, &mut ctx.regs, regs);
        *pos += 1;
        if let Flow::Stop = parent(ctx)? {
            *pos = rows.len();
        }
        if ctx.pause {
            break;
        }
    }
    Ok(if *pos >= rows.len() {
        Status::Done
    } else {
        Status::Paused
    })
}

fn chunk(range: Range<usize>, chunk: Option<(usize, usize)>) -> Range<usize> {
    match chunk {
        None => range,
        Some((i, n)) => {
            let len = range.end - range.start;
            range.start + len * i / n..range.start + len * (i + 1) / n
        }
    }
}

fn loader<'a>(col: &'a Column, r: Reg) -> Loader<'a> {
    macro_rules! fixed {
        ($v:expr, $conv:expr) => {{
            let v = $v;
            match &col.validity {
                None => Box::new(move |regs: &mut [Cell<'a>], row: usize| regs[r] = $conv(v[row])),
                Some(bm) => Box::new(move |regs: &mut [Cell<'a>], row: usize| {
                    regs[r] = if bm.get(row) {
                        $conv(v[row])
                    } else {
                        Cell::Null
                    }
                }),
            }
        }};
    }
    match &col.data {
        ColumnData::Bool(v) => fixed!(v, |x: u8| Cell::Int(x as i64)),
        ColumnData::Int8(v) => fixed!(v, |x: i8| Cell::Int(x as i64)),
        ColumnData::Int16(v) => fixed!(v, |x: i16| Cell::Int(x as i64)),
        ColumnData::Int32(v) => fixed!(v, |x: i32| Cell::Int(x as i64)),
        ColumnData::Int64(v) => fixed!(v, Cell::Int),
        ColumnData::Float32(v) => fixed!(v, Cell::Float),
        ColumnData::Str(t) => Box::new(move |regs: &mut [Cell<'a>], row: usize| {
            regs[r] = t.get(row).map_or(Cell::Null, Cell::Str)
        }),
    }
}

fn literal_pred<'a>(reg: Reg, op: crate::frontend::CmpOp, v: &'a Value) -> Pred<'a> {
    match v {
        Value::Null => Box::new(|_| None),
        Value::Str(s) => {
            let s: &'a str = s;
            Box::new(move |regs| match regs[reg] {
                Cell::Str(x) => Some(op.accepts(x.cmp(s))),
                _ => None,
            })
        }
        Value::Float32(f) => {
            let f = *f;
            Box::new(move |regs| match regs[reg] {
                Cell::Float(x) => x.partial_cmp(&f).map(|o| op.accepts(o)),
                Cell::Int(x) => Some(op.accepts(cmp_int_float(x, f as f64))),
                _ => None,
            })
        }
        other => {
            let k = other.as_i64().unwrap_or_default();
            Box::new(move |regs| match regs[reg] {
                Cell::Int(x) => Some(op.accepts(x.cmp(&k))),
                Cell::Float(x) => Some(op.accepts(cmp_int_float(k, x as f64).reverse())),
                _ => None,
            })
        }
    }
}

fn agg_parts(node: &PlanNode) -> Result<(&[Expr], &[Expr])> {
    match &node.op {
        Operator::Aggregator {
            group_by,
            aggregates,
        } => Ok((group_by, aggregates)),
        other => Err(EngineError::Internal(format!(
            "{} where an aggregator was expected",
            other.name()
        ))),
    }
}

fn new_table<'a>(group_by: &[Expr], aggregates: &[Expr]) -> GroupTable<'a> {
    GroupTable::new(
        !group_by.is_empty(),
        aggregates.iter().map(AggregateState::for_expr).collect(),
    )
}

fn table_rows<'a>(table: &GroupTable<'a>, width: usize) -> RowBuffer<'a> {
    let mut buf = RowBuffer::new(width);
    for row in table.rows() {
        buf.push_row(&row);
    }
    buf
}

fn column_expr(c: &ColumnRef) -> Expr {
    Expr::Column(c.clone())
}

/// Sorts a join side on its key unless the plan already guarantees the order,
/// in which case the guarantee is checked.
fn prepare_side<'a>(mut buf: RowBuffer<'a>, key: usize, sorted: bool) -> Result<RowBuffer<'a>> {
    if sorted {
        for i in 1..buf.len() {
            if order(buf.row(i - 1)[key], buf.row(i)[key]).is_gt() {
                return Err(EngineError::Internal(format!(
                    "merge join input not ordered on its key at row {i}"
                )));
            }
        }
        return Ok(buf);
    }
    let mut perm: Vec<usize> = (0..buf.len()).collect();
    perm.sort_by(|&a, &b| order(buf.row(a)[key], buf.row(b)[key]));
    buf.permute(&perm);
    Ok(buf)
}

/// Pairs of equal-key runs of two key-ordered inputs. NULL keys never match.
fn merge_runs(
    l: &RowBuffer<'_>,
    lk: usize,
    r: &RowBuffer<'_>,
    rk: usize,
) -> Vec<(Range<usize>, Range<usize>)> {
    let (mut i, mut j) = (0, 0);
    let mut runs = Vec::new();
    while i < l.len() && j < r.len() {
        let (a, b) = (l.row(i)[lk], r.row(j)[rk]);
        if a.is_null() {
            i += 1;
            continue;
        }
        if b.is_null() {
            j += 1;
            continue;
        }
        match compare(a, b) {
            Some(std::cmp::Ordering::Less) => i += 1,
            Some(std::cmp::Ordering::Greater) => j += 1,
            Some(std::cmp::Ordering::Equal) => {
                let mut ie = i + 1;
                while ie < l.len() && compare(l.row(ie)[lk], a).is_some_and(|o| o.is_eq()) {
                    ie += 1;
                }
                let mut je = j + 1;
                while je < r.len() && compare(r.row(je)[rk], b).is_some_and(|o| o.is_eq()) {
                    je += 1;
                }
                runs.push((i..ie, j..je));
                i = ie;
                j = je;
            }
            None => break,
        }
    }
    runs
}

impl<'a> Compiler<'a> {
    fn table(&self, name: &str) -> Result<&'a Table> {
        self.catalog
            .get(name)
            .ok_or_else(|| EngineError::UnknownTable(name.to_string()))
    }

    fn node(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        match &node.op {
            Operator::FullScan { table } => self.scan(s, node, table, None, k),
            Operator::IndexScan {
                table,
                column,
                range,
            } => self.scan(s, node, table, Some((column, range)), k),
            Operator::Constraint { tree } => self.constraint(s, node, tree, k),
            Operator::Binner { bins } => self.binner(s, node, bins, k),
            Operator::Aggregator { .. } => self.aggregator(s, node, k),
            Operator::ParallelAggregator { lanes } => self.parallel(s, node, *lanes, k),
            Operator::Sort { keys } => self.materialize(s, node, "Sort", keys, k),
            Operator::Accumulate => self.materialize(s, node, "Accumulate", &[], k),
            Operator::Limit { limit, offset } => self.limit(s, node, *limit, *offset, k),
            Operator::Debug => self.debug(s, node, k),
            Operator::XJoin => self.xjoin(s, node, k),
            Operator::MergeJoin {
                left_key,
                right_key,
            } => self.merge_join(s, node, left_key, right_key, k),
        }
    }

    fn scan(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        table: &str,
        index: Option<(&'a String, &'a PlanRange)>,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let t = self.table(table)?;
        let mut layout = Layout::default();
        let mut loaders = Vec::new();
        for e in &node.expressions {
            if let Expr::Column(c) = e {
                let r = s.ctx.alloc_reg();
                loaders.push(loader(t.column(&c.column)?, r));
                layout.push(e.clone(), r);
            }
        }
        let (rowids, range): (Option<&'a [u64]>, Range<usize>) = match index {
            None => (None, 0..t.row_count() as usize),
            Some((column, range)) => {
                let idx = t.index(column).ok_or_else(|| EngineError::MissingIndex {
                    table: table.to_string(),
                    column: column.clone(),
                })?;
                let r = match &range.bound {
                    None => 0..idx.len(),
                    Some((op, key)) => idx.range(t.column(column)?, *op, key)?,
                };
                (Some(&idx.rowids), r)
            }
        };
        let range = chunk(range, s.chunk);
        let p = s.ctx.prefix(if index.is_some() {
            "IndexScan"
        } else {
            "FullScan"
        });
        let pos_var = s.ctx.register(format!("{p}.position"), range.start as u64);
        let mut consumer = k(self, s, &layout)?;
        let end = range.end;
        Ok(Box::new(move |ctx| {
            let mut pos = *ctx.var::<u64>(pos_var) as usize;
            while pos < end {
                let row = match rowids {
                    Some(ids) => ids[pos] as usize,
                    None => pos,
                };
                for l in &loaders {
                    l(&mut ctx.regs, row);
                }
                pos += 1;
                if let Flow::Stop = consumer(ctx)? {
                    pos = end;
                }
                if ctx.pause {
                    break;
                }
            }
            *ctx.var_mut::<u64>(pos_var) = pos as u64;
            Ok(if pos >= end {
                Status::Done
            } else {
                Status::Paused
            })
        }))
    }

    fn predicate(&mut self, tree: &'a Constraint<QueryPlan>, layout: &Layout) -> Result<Pred<'a>> {
        Ok(match tree {
            Constraint::True => Box::new(|_| Some(true)),
            Constraint::Compare { left, op, right } => {
                let reg = layout.reg(&column_expr(left))?;
                let op = *op;
                match right {
                    crate::frontend::Operand::Literal(v) => literal_pred(reg, op, v),
                    crate::frontend::Operand::Column(c) => {
                        let r2 = layout.reg(&column_expr(c))?;
                        Box::new(move |regs| compare(regs[reg], regs[r2]).map(|o| op.accepts(o)))
                    }
                }
            }
            Constraint::In { column, subquery } => {
                let reg = layout.reg(&column_expr(column))?;
                let slot = self.in_slot(subquery)?;
                Box::new(move |regs| {
                    let c = regs[reg];
                    if c.is_null() {
                        None
                    } else {
                        Some(slot.get().expect("IN set materialized").contains(c))
                    }
                })
            }
            Constraint::And(parts) => {
                let ps = parts
                    .iter()
                    .map(|p| self.predicate(p, layout))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(move |regs| {
                    let mut unknown = false;
                    for p in &ps {
                        match p(regs) {
                            Some(false) => return Some(false),
                            None => unknown = true,
                            Some(true) => {}
                        }
                    }
                    if unknown {
                        None
                    } else {
                        Some(true)
                    }
                })
            }
            Constraint::Or(parts) => {
                let ps = parts
                    .iter()
                    .map(|p| self.predicate(p, layout))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(move |regs| {
                    let mut unknown = false;
                    for p in &ps {
                        match p(regs) {
                            Some(true) => return Some(true),
                            None => unknown = true,
                            Some(false) => {}
                        }
                    }
                    if unknown {
                        None
                    } else {
                        Some(false)
                    }
                })
            }
            Constraint::Not(inner) => {
                let p = self.predicate(inner, layout)?;
                Box::new(move |regs| p(regs).map(|b| !b))
            }
        })
    }

    /// The set an IN subquery evaluates to, materialized once by `init`.
    fn in_slot(&mut self, sub: &'a QueryPlan) -> Result<InSlot<'a>> {
        let key = sub as *const QueryPlan as usize;
        if let Some(slot) = self.in_slots.get(&key) {
            return Ok(slot.clone());
        }
        let slot: InSlot<'a> = Arc::new(OnceLock::new());
        let mut q = compile_with_debug(sub, self.catalog, self.max_lanes, self.debug.clone())?;
        let out = slot.clone();
        self.jobs.push(Box::new(move || {
            let mut set = InSet::default();
            while q.fetch_row()? {
                set.insert(q.output_slots()[0].cell);
            }
            q.destroy();
            let _ = out.set(set);
            Ok(())
        }));
        self.in_slots.insert(key, slot.clone());
        Ok(slot)
    }

    fn constraint(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        tree: &'a Constraint<QueryPlan>,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        self.node(s, &node.children[0], &mut |c, s, layout| {
            let pred = c.predicate(tree, layout)?;
            let mut parent = k(c, s, layout)?;
            let f: Consumer<'a> = Box::new(move |ctx| {
                if pred(&ctx.regs) == Some(true) {
                    parent(ctx)
                } else {
                    Ok(Flow::Continue)
                }
            });
            Ok(f)
        })
    }

    /// First binner phase: bounds of each bin input over the qualifying rows.
    fn bin_slot(&mut self, node: &'a PlanNode, bins: &'a [BinSpec]) -> Result<BoundsSlot> {
        let key = node as *const PlanNode as usize;
        if let Some(slot) = self.bin_slots.get(&key) {
            return Ok(slot.clone());
        }
        let mut js = Scope::new(None);
        let var = js
            .ctx
            .register("Binner.bounds", vec![None::<BinBounds>; bins.len()]);
        let mut producer = self.node(&mut js, &node.children[0], &mut |_, _, layout| {
            let inputs = bins
                .iter()
                .map(|b| layout.reg(&column_expr(&b.column)))
                .collect::<Result<Vec<_>>>()?;
            let f: Consumer<'a> = Box::new(move |ctx| {
                let (regs, bounds) = ctx.regs_and_var::<Vec<Option<BinBounds>>>(var);
                for (r, b) in inputs.iter().zip(bounds.iter_mut()) {
                    if let Some(v) = regs[*r].as_f64() {
                        BinBounds::observe(b, v);
                    }
                }
                Ok(Flow::Continue)
            });
            Ok(f)
        })?;
        let slot: BoundsSlot = Arc::new(OnceLock::new());
        let out = slot.clone();
        let mut ctx = js.ctx;
        self.jobs.push(Box::new(move || {
            run_to_end(&mut producer, &mut ctx)?;
            let _ = out.set(std::mem::take(ctx.var_mut::<Vec<Option<BinBounds>>>(var)));
            Ok(())
        }));
        self.bin_slots.insert(key, slot.clone());
        Ok(slot)
    }

    fn binner(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        bins: &'a [BinSpec],
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let slot = self.bin_slot(node, bins)?;
        self.node(s, &node.children[0], &mut |c, s, layout| {
            let mut out = layout.clone();
            let mut specs = Vec::new();
            for b in bins {
                let input = layout.reg(&column_expr(&b.column))?;
                let regs = [s.ctx.alloc_reg(), s.ctx.alloc_reg(), s.ctx.alloc_reg()];
                out.push(b.expr(BinFunc::Bin), regs[0]);
                out.push(b.expr(BinFunc::BinMin), regs[1]);
                out.push(b.expr(BinFunc::BinMax), regs[2]);
                specs.push((input, b.bins, regs));
            }
            let mut parent = k(c, s, &out)?;
            let slot = slot.clone();
            let f: Consumer<'a> = Box::new(move |ctx| {
                let bounds = slot.get().expect("bin bounds resolved");
                for ((input, n, [rb, rmin, rmax]), bound) in specs.iter().zip(bounds) {
                    let cells = match (ctx.regs[*input].as_f64(), bound) {
                        (Some(v), Some(b)) => {
                            let (i, lo, hi) = b.assign(v, *n);
                            [Cell::Int(i), Cell::Float(lo), Cell::Float(hi)]
                        }
                        _ => [Cell::Null; 3],
                    };
                    ctx.regs[*rb] = cells[0];
                    ctx.regs[*rmin] = cells[1];
                    ctx.regs[*rmax] = cells[2];
                }
                parent(ctx)
            });
            Ok(f)
        })
    }

    fn aggregate_consumer(
        &mut self,
        agg: &'a PlanNode,
        layout: &Layout,
        var: VarId,
    ) -> Result<Consumer<'a>> {
        let (group_by, aggregates) = agg_parts(agg)?;
        let keys = group_by
            .iter()
            .map(|e| layout.reg(e))
            .collect::<Result<Vec<_>>>()?;
        let inputs = aggregates
            .iter()
            .map(|e| match e {
                Expr::Aggregate { arg: None, .. } => Ok(None),
                Expr::Aggregate { arg: Some(c), .. } => layout.reg(&column_expr(c)).map(Some),
                other => layout.reg(other).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scratch: Vec<Cell<'a>> = Vec::with_capacity(keys.len());
        Ok(Box::new(move |ctx| {
            let (regs, table) = ctx.regs_and_var::<GroupTable<'a>>(var);
            scratch.clear();
            scratch.extend(keys.iter().map(|&r| regs[r]));
            let states = table.group(&scratch);
            for (st, input) in states.iter_mut().zip(&inputs) {
                st.update(match input {
                    Some(r) => regs[*r],
                    None => Cell::Int(1),
                });
            }
            Ok(Flow::Continue)
        }))
    }

    fn output_layout(s: &mut Scope<'a>, exprs: &[&Expr]) -> (Layout, Vec<Reg>) {
        let mut layout = Layout::default();
        let mut regs = Vec::new();
        for e in exprs {
            let r = s.ctx.alloc_reg();
            layout.push((*e).clone(), r);
            regs.push(r);
        }
        (layout, regs)
    }

    fn aggregator(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let (group_by, aggregates) = agg_parts(node)?;
        let p = s.ctx.prefix("Aggregator");
        let var = s
            .ctx
            .register(format!("{p}.groups"), new_table(group_by, aggregates));
        let mut child = self.node(s, &node.children[0], &mut |c, _, layout| {
            c.aggregate_consumer(node, layout, var)
        })?;
        let exprs: Vec<&Expr> = group_by.iter().chain(aggregates).collect();
        let (layout, regs) = Self::output_layout(s, &exprs);
        let mut parent = k(self, s, &layout)?;
        let mut rows: Option<RowBuffer<'a>> = None;
        let mut pos = 0;
        Ok(Box::new(move |ctx| {
            if rows.is_none() {
                run_to_end(&mut child, ctx)?;
                let table = std::mem::replace(
                    ctx.var_mut::<GroupTable<'a>>(var),
                    GroupTable::new(true, Vec::new()),
                );
                rows = Some(table_rows(&table, regs.len()));
            }
            emit(
                ctx,
                rows.as_ref().expect("built"),
                &regs,
                &mut pos,
                &mut parent,
            )
        }))
    }

    fn parallel(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        lanes: usize,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let agg = &node.children[0];
        let (group_by, aggregates) = agg_parts(agg)?;
        let n = lanes.min(self.max_lanes).max(1);
        let p = s.ctx.prefix("ParallelAggregator");
        s.ctx.register(format!("{p}.lanes"), n as u64);
        let mut workers = Vec::with_capacity(n);
        for i in 0..n {
            let mut ls = Scope::new(Some((i, n)));
            let var = ls
                .ctx
                .register("Aggregator.groups", new_table(group_by, aggregates));
            let prod = self.node(&mut ls, &agg.children[0], &mut |c, _, layout| {
                c.aggregate_consumer(agg, layout, var)
            })?;
            workers.push((ls.ctx, prod, var));
        }
        let exprs: Vec<&Expr> = group_by.iter().chain(aggregates).collect();
        let (layout, regs) = Self::output_layout(s, &exprs);
        let mut parent = k(self, s, &layout)?;
        let mut rows: Option<RowBuffer<'a>> = None;
        let mut pos = 0;
        Ok(Box::new(move |ctx| {
            if rows.is_none() {
                let mut tables = run_lanes(&mut workers)?.into_iter();
                let mut acc = tables.next().expect("at least one lane");
                for t in tables {
                    acc = acc.combine(t)?;
                }
                rows = Some(table_rows(&acc, regs.len()));
            }
            emit(
                ctx,
                rows.as_ref().expect("built"),
                &regs,
                &mut pos,
                &mut parent,
            )
        }))
    }

    fn buffer_consumer(s: &mut Scope<'a>, var: VarId, layout: &Layout) -> Consumer<'a> {
        let regs = layout.regs();
        *s.ctx.var_mut::<RowBuffer<'a>>(var) = RowBuffer::new(regs.len());
        Box::new(move |ctx| {
            let (cells, buf) = ctx.regs_and_var::<RowBuffer<'a>>(var);
            buf.push_from(cells, &regs);
            Ok(Flow::Continue)
        })
    }

    fn materialize(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        name: &'static str,
        keys: &'a [OrderKey],
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let p = s.ctx.prefix(name);
        let var = s.ctx.register(format!("{p}.rows"), RowBuffer::new(0));
        let mut layout = Layout::default();
        let mut child = self.node(s, &node.children[0], &mut |_, s, l| {
            layout = l.clone();
            Ok(Self::buffer_consumer(s, var, l))
        })?;
        let key_pos = keys
            .iter()
            .map(|key| Ok((layout.position(&key.expr)?, key.desc)))
            .collect::<Result<Vec<_>>>()?;
        let regs = layout.regs();
        let mut parent = k(self, s, &layout)?;
        let mut rows: Option<RowBuffer<'a>> = None;
        let mut pos = 0;
        Ok(Box::new(move |ctx| {
            if rows.is_none() {
                run_to_end(&mut child, ctx)?;
                let mut buf = std::mem::take(ctx.var_mut::<RowBuffer<'a>>(var));
                if !key_pos.is_empty() {
                    let mut perm: Vec<usize> = (0..buf.len()).collect();
                    perm.sort_by(|&a, &b| {
                        let (ra, rb) = (buf.row(a), buf.row(b));
                        key_pos
                            .iter()
                            .map(|&(i, desc)| {
                                let o = order(ra[i], rb[i]);
                                if desc {
                                    o.reverse()
                                } else {
                                    o
                                }
                            })
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                    buf.permute(&perm);
                }
                rows = Some(buf);
            }
            emit(
                ctx,
                rows.as_ref().expect("built"),
                &regs,
                &mut pos,
                &mut parent,
            )
        }))
    }

    fn limit(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        limit: Option<u64>,
        offset: u64,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let p = s.ctx.prefix("Limit");
        let var = s.ctx.register(format!("{p}.currentPosition"), 0u64);
        let end = limit.map(|l| offset.saturating_add(l));
        let mut child = self.node(s, &node.children[0], &mut |c, s, layout| {
            let mut parent = k(c, s, layout)?;
            let f: Consumer<'a> = Box::new(move |ctx| {
                // The child's values are already in the registers; only now is the counter checked.
                let pos = ctx.var_mut::<u64>(var);
                let cur = *pos;
                if end.is_some_and(|e| cur >= e) {
                    return Ok(Flow::Stop);
                }
                *pos += 1;
                let last = end.is_some_and(|e| cur + 1 >= e);
                if cur < offset {
                    return Ok(if last { Flow::Stop } else { Flow::Continue });
                }
                let flow = parent(ctx)?;
                Ok(if last { Flow::Stop } else { flow })
            });
            Ok(f)
        })?;
        Ok(Box::new(move |ctx| {
            if limit == Some(0) || end.is_some_and(|e| *ctx.var::<u64>(var) >= e) {
                return Ok(Status::Done);
            }
            child(ctx)
        }))
    }

    fn debug(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let sink = self.debug.clone();
        self.node(s, &node.children[0], &mut |c, s, layout| {
            let cols = node
                .expressions
                .iter()
                .map(|e| Ok((layout.reg(e)?, e.ty())))
                .collect::<Result<Vec<_>>>()?;
            let mut parent = k(c, s, layout)?;
            let sink = sink.clone();
            let f: Consumer<'a> = Box::new(move |ctx| {
                let line = cols
                    .iter()
                    .map(|&(r, ty)| ctx.regs[r].to_value(ty).to_string())
                    .collect::<Vec<_>>()
                    .join("|");
                if let Ok(mut w) = sink.lock() {
                    let _ = writeln!(w, "{line}");
                }
                parent(ctx)
            });
            Ok(f)
        })
    }

    fn xjoin(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let p = s.ctx.prefix("XJoin");
        let var = s.ctx.register(format!("{p}.right"), RowBuffer::new(0));
        let mut right_layout = Layout::default();
        let mut right = self.node(s, &node.children[1], &mut |_, s, l| {
            right_layout = l.clone();
            Ok(Self::buffer_consumer(s, var, l))
        })?;
        let slot: Arc<OnceLock<RowBuffer<'a>>> = Arc::new(OnceLock::new());
        let rregs = right_layout.regs();
        let probe = slot.clone();
        let mut left = self.node(s, &node.children[0], &mut |c, s, l| {
            let joined = l.concat(&right_layout);
            let mut parent = k(c, s, &joined)?;
            let probe = probe.clone();
            let rregs = rregs.clone();
            let f: Consumer<'a> = Box::new(move |ctx| {
                let buf = probe.get().expect("right side materialized");
                for i in 0..buf.len() {
                    buf.load_into(i, &mut ctx.regs, &rregs);
                    if let Flow::Stop = parent(ctx)? {
                        return Ok(Flow::Stop);
                    }
                }
                Ok(Flow::Continue)
            });
            Ok(f)
        })?;
        Ok(Box::new(move |ctx| {
            if slot.get().is_none() {
                run_to_end(&mut right, ctx)?;
                let _ = slot.set(std::mem::take(ctx.var_mut::<RowBuffer<'a>>(var)));
            }
            left(ctx)
        }))
    }

    fn merge_join(
        &mut self,
        s: &mut Scope<'a>,
        node: &'a PlanNode,
        left_key: &'a ColumnRef,
        right_key: &'a ColumnRef,
        k: Cont<'_, 'a>,
    ) -> Result<Producer<'a>> {
        let p = s.ctx.prefix("MergeJoin");
        let lvar = s.ctx.register(format!("{p}.left"), RowBuffer::new(0));
        let rvar = s.ctx.register(format!("{p}.right"), RowBuffer::new(0));
        let (mut ll, mut rl) = (Layout::default(), Layout::default());
        let mut left = self.node(s, &node.children[0], &mut |_, s, l| {
            ll = l.clone();
            Ok(Self::buffer_consumer(s, lvar, l))
        })?;
        let mut right = self.node(s, &node.children[1], &mut |_, s, l| {
            rl = l.clone();
            Ok(Self::buffer_consumer(s, rvar, l))
        })?;
        let (lke, rke) = (column_expr(left_key), column_expr(right_key));
        let (lk, rk) = (ll.position(&lke)?, rl.position(&rke)?);
        let sorted =
            |n: &PlanNode, e: &Expr| ordering(n).first().is_some_and(|o| o.matches(e, false));
        let lsorted = sorted(&node.children[0], &lke);
        let rsorted = sorted(&node.children[1], &rke);
        let (lregs, rregs) = (ll.regs(), rl.regs());
        let mut parent = k(self, s, &ll.concat(&rl))?;
        struct Merge<'a> {
            left: RowBuffer<'a>,
            right: RowBuffer<'a>,
            runs: Vec<(Range<usize>, Range<usize>)>,
            run: usize,
            li: usize,
        }
        let mut state: Option<Merge<'a>> = None;
        Ok(Box::new(move |ctx| {
            if state.is_none() {
                run_to_end(&mut left, ctx)?;
                run_to_end(&mut right, ctx)?;
                let lb = prepare_side(std::mem::take(ctx.var_mut(lvar)), lk, lsorted)?;
                let rb = prepare_side(std::mem::take(ctx.var_mut(rvar)), rk, rsorted)?;
                let runs = merge_runs(&lb, lk, &rb, rk);
                state = Some(Merge {
                    left: lb,
                    right: rb,
                    runs,
                    run: 0,
                    li: 0,
                });
            }
            let st = state.as_mut().expect("built");
            while st.run < st.runs.len() {
                let (lr, rr) = st.runs[st.run].clone();
                st.left.load_into(lr.start + st.li, &mut ctx.regs, &lregs);
                st.li += 1;
                if lr.start + st.li >= lr.end {
                    st.run += 1;
                    st.li = 0;
                }
                for j in rr {
                    st.right.load_into(j, &mut ctx.regs, &rregs);
                    if let Flow::Stop = parent(ctx)? {
                        st.run = st.runs.len();
                        return Ok(Status::Done);
                    }
                }
                if ctx.pause {
                    break;
                }
            }
            Ok(if st.run >= st.runs.len() {
                Status::Done
            } else {
                Status::Paused
            })
        }))
    }
}

type Worker<'a> = (QueryContext<'a>, Producer<'a>, VarId);

/// Runs each lane on its own thread and returns the partial tables in lane order.
fn run_lanes<'a>(workers: &mut [Worker<'a>]) -> Result<Vec<GroupTable<'a>>> {
    std::thread::scope(|sc| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|(ctx, p, var)| {
                let var = *var;
                sc.spawn(move || -> Result<GroupTable<'a>> {
                    run_to_end(p, ctx)?;
                    Ok(std::mem::replace(
                        ctx.var_mut::<GroupTable<'a>>(var),
                        GroupTable::new(true, Vec::new()),
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(EngineError::Internal("parallel lane panicked".into())))
            })
            .collect()
    })
}
