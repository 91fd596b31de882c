//! Problem generators with known structure.

pub mod plate;
pub mod random;
pub mod synthetic;

pub use plate::{ArmPattern, CrossGeometry, GridLayout, GridMode, cross_plate, cross_plate_initial_guess};
pub use random::{random_pair, random_solvable_pencil};
pub use synthetic::{SYNCHRONOUS_SPEED, SyntheticSpec, area_pattern, area_split, electromech_init, synthetic_composite};
