//! Surrogate-assisted optimization for expensive electromagnetic-transient
//! power-system studies.
//!
//! The crate couples Gaussian-process surrogates ([`gp`]) and their
//! hyperparameter inference ([`hyper`]) with acquisition rules
//! ([`acquisition`]) inside a sequential design loop ([`bo`]). Objectives
//! ([`objectives`]) are either lookup tables on a grid or a desk-scale EMT
//! simulation of transformer energization ([`emt`]). Reference optimizers
//! live in [`baselines`], threshold-exceedance estimation in
//! [`exceedance`], and the config-driven study runner in [`study`].

pub mod acquisition;
pub mod baselines;
pub mod bo;
pub mod emt;
pub mod error;
pub mod exceedance;
pub mod gp;
pub mod hyper;
pub mod objectives;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
