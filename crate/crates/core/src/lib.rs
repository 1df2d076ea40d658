pub mod formulator;
pub mod io;
pub mod mip;
pub mod predictor;
pub mod solve;
pub mod surrogatelib;
pub mod verify;
