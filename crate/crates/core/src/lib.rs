//! Secure, Byzantine-resilient federated aggregation and a deterministic
//! simulator for it.

pub mod adversary;
pub mod beaver;
pub mod codec;
pub mod discriminator;
pub mod field;
pub mod flsim;
pub mod mac;
pub mod protocol;
pub mod quant;
pub mod rng;
pub mod sss;
pub mod ttp;
