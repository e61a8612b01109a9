//! Numerical laboratory for critical circle maps and infinitely
//! renormalizable unimodal maps.

pub mod circle_maps;
pub mod contfrac;
pub mod dd;
pub mod error;
pub mod invariant_measure;
pub mod lyapunov;
pub mod partitions;
pub mod quadrature;
pub mod rotation;
pub mod scalar;
pub mod sum;
pub mod unimodal;

pub use dd::DoubleDouble;
pub use error::{Error, Result};
pub use scalar::Real;

pub type Dd = DoubleDouble;

pub type Rational = num_rational::BigRational;

pub type Map64 = circle_maps::CircleMapModel<f64>;
pub type MapDd = circle_maps::CircleMapModel<Dd>;
pub type Rotation64 = contfrac::RotationNumber<f64>;
pub type RotationDd = contfrac::RotationNumber<Dd>;
pub type Partition64 = partitions::DynamicalPartition<f64>;
pub type Ladder64 = partitions::PartitionLadder<f64>;
pub type Unimodal64 = unimodal::UnimodalMap<f64>;
pub type Tower64 = unimodal::RenormalizationTower<f64>;
