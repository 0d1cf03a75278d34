//! Phase mixing for the 1D transport equation `∂ₜf + v∂ₓf − Φ′(x)∂ᵥf = 0`
//! in the quartic confining potential `Φ(x) = x²/2 + εx⁴/2`.

pub mod action_angle;
pub mod cli;
pub mod flow;
pub mod mixing;
pub mod moments;
pub mod potential;
pub mod quadrature;
pub mod transport;
