//! Link-level Monte Carlo simulator for a coded random access system in
//! which colliding packets are resolved by physical-layer network coding:
//! the receiver decodes XOR combinations of the colliding codewords in each
//! slot and solves the resulting linear system over GF(2) at frame level.
//! A small per-degree neural network predicts which combinations are worth
//! attempting, trading decoding attempts against packet loss.
//!
//! The crate is organized bottom-up:
//!
//! - [`gf2`]: bit-packed GF(2) vectors/matrices, elimination, recovery.
//! - [`ldpc`]: a (128, 64) LDPC code with belief-propagation decoding.
//! - [`phy`]: BPSK over block-fading AWGN and LLR computation, including
//!   the joint LLR of a XOR combination under interference.
//! - [`traffic`]: frame schedules (active sets and replica placement).
//! - [`slot`]: the slot-level receiver (SIC, sum decoding, iteration).
//! - [`frame`]: frame-level assembly, elimination and loss accounting.
//! - [`mlp`]: the per-degree success predictor and its Adam trainer.
//! - [`datagen`]: training set generation and classifier metrics.
//! - [`harness`]: seeded experiment drivers producing CSV tables.
//! - [`parallel`]: deterministic data-parallel mapping (rayon-backed when
//!   the `parallel` feature is enabled, sequential otherwise).

pub mod datagen;
pub mod frame;
pub mod gf2;
pub mod harness;
pub mod ldpc;
pub mod mlp;
pub mod parallel;
pub mod phy;
pub mod slot;
pub mod traffic;

pub use gf2::{BitMatrix, BitWord};
pub use harness::derive_rng;
pub use ldpc::LdpcCode;
pub use phy::FadingSpec;
pub use slot::{DecoderConfig, SelectionPolicy};
