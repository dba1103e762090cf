pub mod evaluate;
pub mod generate;
pub mod gradcheck;
pub mod prepare;
pub mod sweep;
pub mod train;
