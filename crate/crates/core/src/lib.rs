pub mod certify;
pub mod cli;
pub mod darboux;
pub mod dynamics;
pub mod poly;
pub mod reach;
pub mod sim;
