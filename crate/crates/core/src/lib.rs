pub mod automata;
pub mod env;
pub mod harness;
pub mod learner;
pub mod ltl;
pub mod product;
pub mod shaping;
pub mod testkit;
