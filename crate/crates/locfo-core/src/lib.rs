//! Local first-order logic over data structures.
//!
//! A D-data structure is a finite set of elements, each carrying unary labels and a vector of
//! D data values. Formulas compare values across elements with `x ~i:j y` and can restrict
//! evaluation to the r-neighbourhood of an element with the local modality `loc[r] x { ... }`.
//!
//! The crate provides the structures and formulas, a model checker, ball and view
//! computation, the satisfiability-preserving translations between fragments, the
//! tiling gadgets, and bounded satisfiability search used to validate all of them.

#![no_std]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod existred;
pub mod formula;
pub mod gadgets;
pub mod locality;
pub mod localred;
pub mod normalform;
pub mod sat;
pub mod structure;
pub mod syntax;

pub use error::{Error, Result, SourceSpan};
pub use formula::Formula;
pub use structure::{DataStructure, Element, Field, Signature, Value};
