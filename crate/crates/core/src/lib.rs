//! Interrupt detection through the cache state of the interrupt descriptor
//! table, on a simulated single core.
//!
//! A user process cannot read the IDT, but a suppressed transient load of an
//! IDT entry only returns data while the entry's line sits in L1D. Interrupt
//! delivery brings that line in, so polling the entry reveals when the
//! interrupt arrived. The crate models the machine ([`mem_model`], [`cache`],
//! [`core_sim`]), the attacks ([`attacks`]), victim workloads
//! ([`workloads`]), scoring and classification ([`analysis`]) and the
//! end-to-end experiments ([`experiments`]).

pub mod analysis;
pub mod attacks;
pub mod cache;
pub mod config;
pub mod core_sim;
pub mod experiments;
pub mod mem_model;
pub mod seed;
pub mod workloads;

pub use config::SimConfig;
pub use core_sim::{Core, Cycle};
