pub mod compare;
pub mod process;
pub mod render;
pub mod simulate;
