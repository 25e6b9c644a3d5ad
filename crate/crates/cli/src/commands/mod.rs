pub mod augment;
pub mod coverage;
pub mod eval;
pub mod index;
pub mod mine;
pub mod pano;
pub mod subset;
pub mod train;
