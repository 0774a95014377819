//! Pricing of perpetual futures and everlasting options.
//!
//! Closed forms in discrete and continuous time, series and Monte Carlo
//! oracles, replication backtests and funding-history analytics.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod everlasting;
pub mod figures;
pub mod history;
pub mod mc;
pub mod model;
pub mod replication;

pub use error::{PricingError, Result};
pub use model::{
    ContractKind, ContractSpec, Currency, FundingConvention, FundingSpec, GbmModel, Payoff,
    PriceQuote, QuoteSource, RateEnvironment, SmoothPayoff, TimeMode,
};
