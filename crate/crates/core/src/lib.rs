//! Exact tools for finite metric spaces in the maximum norm: isometric copy
//! search, baton extraction from dense grid subsets, anchor sequences,
//! Ramsey-avoiding periodic colorings, exact chromatic numbers of copy
//! hypergraphs and minimum torus covers.

pub mod baton;
pub mod certificate;
pub mod chroma;
pub mod colorings;
pub mod dirichlet;
pub mod error;
pub mod metric;
pub mod rational;
pub mod torus;

pub use error::{Error, Result};
pub use metric::{Baton, CopyEmbedding, FiniteMetricSpace, PointSet};
pub use rational::Rational;
