//! MNIST ingestion and the SYMC / SYMQ persistence formats.

pub mod mnist;
mod record;
pub mod symc;
pub mod symq;

pub use mnist::{load_mnist, Mnist, Normalization};
pub use symc::{load_checkpoint, save_checkpoint};
pub use symq::{load_quantized, save_quantized};
