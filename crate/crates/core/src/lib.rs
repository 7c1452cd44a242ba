pub mod analysis;
pub mod channel;
pub mod codec;
pub mod crc;
pub mod galois;
pub mod harness;
pub mod recovery;
pub mod relay;
