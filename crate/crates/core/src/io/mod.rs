//! Array files, scene bundles and result directories.

pub mod bundle;
pub mod npy;
pub mod result;
