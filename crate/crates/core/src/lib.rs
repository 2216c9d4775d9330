//! Unicritical and bicritical odd polynomial dynamics.

pub mod dynamics;
pub mod family;
pub mod flat_config;
pub mod loci;
pub mod pcf;
pub mod poly;
pub mod rays;
pub mod render;
pub mod scalar;
pub mod verify;

pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

pub type Unicritical64 = family::Unicritical<f64>;
pub type Unicritical32 = family::Unicritical<f32>;
pub type BicriticalOdd64 = family::BicriticalOdd<f64>;
pub type BicriticalOdd32 = family::BicriticalOdd<f32>;
pub type MonicOdd64 = family::MonicOdd<f64>;
pub type MonicOdd32 = family::MonicOdd<f32>;
