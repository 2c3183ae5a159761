pub mod families;
pub mod numeric;
pub mod params;
pub mod rotation;
pub mod su2;
pub mod synth;
pub mod verify;
pub mod wgen;
