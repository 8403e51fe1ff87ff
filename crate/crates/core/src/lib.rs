//! Reconstruction of road-generalizable crash scenarios from structured
//! accident abstracts.

pub mod constraint;
pub mod extraction;
pub mod fixtures;
pub mod geometry;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod render;
pub mod road;
pub mod scenario;
pub mod validation;
pub mod verify;
