pub mod approx;
pub mod bench;
pub mod bound;
pub mod lemma1;
pub mod spectrum;

mod common;
