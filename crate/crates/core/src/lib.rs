pub mod aliasstore;
pub mod anonymizer;
pub mod backtest;
pub mod corpus;
pub mod pipeline;
pub mod scorer;
pub mod stats;
pub mod synthlab;

#[cfg(all(test, feature = "remote"))]
mod testserver;
