use super::compile::{Job, Producer, Status};
use super::context::{OutputSlot, QueryContext};
use super::Result;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Compiled,
    Running,
    Finished,
    Destroyed,
}

/// A compiled query: `init` runs the one-off jobs (IN subqueries, bin bounds),
/// `fetch_row` computes the next row into the output slots.
pub struct CompiledQuery<'a> {
    ctx: QueryContext<'a>,
    producer: Option<Producer<'a>>,
    jobs: Vec<Job<'a>>,
    slots: Vec<OutputSlot<'a>>,
    state: State,
    exhausted: bool,
}

impl<'a> CompiledQuery<'a> {
    pub(crate) fn new(
        ctx: QueryContext<'a>,
        producer: Producer<'a>,
        jobs: Vec<Job<'a>>,
        slots: Vec<OutputSlot<'a>>,
    ) -> Self {
        Self {
            ctx,
            producer: Some(producer),
            jobs,
            slots,
            state: State::Compiled,
            exhausted: false,
        }
    }

    /// Runs the preparatory jobs. Called implicitly by the first `fetch_row`.
    pub fn init(&mut self) -> Result<()> {
        if self.state != State::Compiled {
            return Ok(());
        }
        for job in &mut self.jobs {
            if let Err(e) = job() {
                self.state = State::Finished;
                return Err(e);
            }
        }
        self.jobs.clear();
        self.state = State::Running;
        Ok(())
    }

    /// Computes the next row. Returns `false` at EOF, and keeps doing so.
    pub fn fetch_row(&mut self) -> Result<bool> {
        match self.state {
            State::Compiled => self.init()?,
            State::Finished | State::Destroyed => return Ok(false),
            State::Running => {}
        }
        let width = self.slots.len();
        loop {
            if self.ctx.out.len() >= width && !self.ctx.out.is_empty() {
                for slot in &mut self.slots {
                    slot.cell = self.ctx.out.pop_front().expect("buffered cell");
                }
                return Ok(true);
            }
            if self.exhausted {
                self.state = State::Finished;
                return Ok(false);
            }
            self.ctx.pause = false;
            let producer = self
                .producer
                .as_mut()
                .expect("producer present while running");
            match producer(&mut self.ctx) {
                Ok(Status::Done) => self.exhausted = true,
                Ok(Status::Paused) => {}
                Err(e) => {
                    self.state = State::Finished;
                    return Err(e);
                }
            }
        }
    }

    /// Releases execution state. Safe to call more than once.
    pub fn destroy(&mut self) {
        self.producer = None;
        self.jobs.clear();
        self.ctx.out.clear();
        self.state = State::Destroyed;
    }

    pub fn output_slots(&self) -> &[OutputSlot<'a>] {
        &self.slots
    }

    pub fn context(&self) -> &QueryContext<'a> {
        &self.ctx
    }

    /// The current row as values.
    pub fn row(&self) -> Vec<Value> {
        self.slots.iter().map(OutputSlot::value).collect()
    }
}

/// Row-at-a-time access to a query result.
pub struct ResultCursor<'a> {
    query: CompiledQuery<'a>,
    row: Vec<Value>,
}

impl<'a> ResultCursor<'a> {
    pub fn new(query: CompiledQuery<'a>) -> Self {
        Self {
            query,
            row: Vec::new(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Result<bool> {
        let has = self.query.fetch_row()?;
        if has {
            self.row = self.query.row();
        } else {
            self.row.clear();
        }
        Ok(has)
    }

    /// The row fetched by the last successful `next`.
    pub fn values(&self) -> &[Value] {
        &self.row
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.query
            .output_slots()
            .iter()
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn column_types(&self) -> Vec<crate::value::ColumnType> {
        self.query.output_slots().iter().map(|s| s.ty).collect()
    }

    pub fn query(&self) -> &CompiledQuery<'a> {
        &self.query
    }

    /// Drains the remaining rows.
    pub fn collect_rows(&mut self) -> Result<Vec<Vec<Value>>> {
        let mut rows = Vec::new();
        while self.next()? {
            rows.push(std::mem::take(&mut self.row));
        }
        Ok(rows)
    }
}

impl Drop for ResultCursor<'_> {
    fn drop(&mut self) {
        self.query.destroy();
    }
}
