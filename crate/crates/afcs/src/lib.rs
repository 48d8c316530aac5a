//! Analysis and simulation of adaptive feedback communication links.

pub mod erf;
pub mod link;
pub mod montecarlo;
pub mod normal;
pub mod params;
pub mod theory;
