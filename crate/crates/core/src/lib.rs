pub mod engine;
pub mod frontend;
pub mod ingest;
pub mod optimizer;
pub mod planner;
pub mod session;
pub mod storage;
pub mod value;

pub use session::{Database, Error, Output, QueryResult};
pub use value::{ColumnType, Value};
