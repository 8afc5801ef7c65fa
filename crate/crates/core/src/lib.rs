//! Day-ahead bidding for a wind farm paired with an electrolyzer: market data,
//! the electrolyzer model, linear decision policies, their training, bidding
//! curves and back-testing.

pub mod backtest;
pub mod curves;
pub mod electrolyzer;
pub mod market_data;
pub mod policy;
pub mod stats;
pub mod training;
