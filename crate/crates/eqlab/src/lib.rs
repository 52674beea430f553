//! Equilibrium counting on convex shapes.
//!
//! The crate computes critical points of the distance function from a
//! reference point on smooth convex curves, their polygonal and random
//! discretizations, evolving curves (curve shortening and inward wave
//! fronts), and convex surfaces/triangle meshes; plus the scaling laws the
//! discrete counts obey near caustics.

pub mod curve;
pub mod discretize;
pub mod events;
pub mod fit;
pub mod flock;
pub mod flow;
pub mod geom;
pub mod rng;
pub mod tol;
