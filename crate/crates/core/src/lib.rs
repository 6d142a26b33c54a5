//! Low-depth random state and unitary ensembles with design-quality audits.
//!
//! The crate is layered bottom-up: binary-field arithmetic ([`gf2field`]),
//! polynomial k-wise independent hashing ([`kwise`]), reversible-circuit
//! compilation of both ([`revcircuit`]), a dense simulator ([`quantsim`]),
//! ensemble samplers ([`ensembles`]), moment and error estimators
//! ([`designmetrics`]) and the collision distinguisher ([`lbtest`]).

pub mod designmetrics;
pub mod ensembles;
pub mod error;
pub mod gf2field;
pub mod kwise;
pub mod lbtest;
pub mod randomness;
pub mod quantsim;
pub mod revcircuit;

pub use error::{Error, Result};
