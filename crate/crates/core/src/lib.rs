pub mod error;
pub mod eval;
pub mod format;
pub mod gen;
pub mod instruct;
pub mod pipeline;
pub mod render;
pub mod table;
pub mod tasks;
