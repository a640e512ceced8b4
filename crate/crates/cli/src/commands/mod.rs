pub mod example;
pub mod fit;
pub mod sample;
pub mod verify;
