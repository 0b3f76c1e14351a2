//! Built-in operator generators: lumped RLC ladders with analytic Q, random
//! passive operators for property tests, and a thin-wire array MoM.

mod random;
mod rlc;
mod wire;

pub use random::{gen_random_passive, gen_random_receiver, RandomPassive, RandomReceiver};
pub use rlc::{gen_rlc_ladder, RlcLadder};
pub use wire::{gen_wire_array, surface_resistance, WireArray, COPPER_CONDUCTIVITY};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Free-space impedance, Ω.
pub fn eta0() -> f64 {
    (MU0 / EPS0).sqrt()
}
