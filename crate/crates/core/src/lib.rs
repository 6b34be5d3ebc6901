#![no_std]
extern crate alloc;

pub mod analysis;
pub mod error;
pub mod floquet;
pub mod ionchain;
pub mod noise;
pub mod observables;
pub mod qmc;
pub mod spinsim;

pub use error::{Error, Result};
