pub mod classify;
pub mod fit;
pub mod population;
