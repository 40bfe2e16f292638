//! Building blocks of the iterated measure construction.
pub mod driver;
pub mod extremal;
pub mod lemma;
pub mod realline;
pub mod transform;
pub mod trig;
