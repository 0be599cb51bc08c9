//! Lexical fuzzing of IoT device protocols from captured traffic.

pub mod capture;
pub mod codec;
pub mod protocol;
pub mod seeds;
pub mod assess;
pub mod mutation;
pub mod injector;
pub mod mock;
pub mod cli;
