//! File codecs: TSR tensors and binary netpbm images.

pub mod pnm;
pub mod tsr;
