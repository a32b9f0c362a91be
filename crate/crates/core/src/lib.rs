pub mod cli;
pub mod expr;
pub mod riemann;
pub mod smms;
pub mod obstruction;
pub mod tractor;
