//! Joint training of acoustic word embeddings and text-derived proxy
//! embeddings under a family of proxy-based metric-learning losses.
//!
//! The crate is organized bottom-up: [`math`] holds the stable numerical
//! primitives, [`losses`] the loss catalog with analytic gradients,
//! [`encoders`] the recurrent acoustic and text encoders with hand-written
//! backpropagation, [`data`] the synthetic word-segment corpus, [`eval`] the
//! word-discrimination metrics and [`train`] the optimizer, training loop
//! and comparison grids.

pub mod audit;
pub mod data;
pub mod encoders;
pub mod eval;
pub mod losses;
pub mod math;
pub mod seed;
pub mod train;
