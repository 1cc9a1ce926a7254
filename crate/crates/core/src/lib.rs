//! Task planning and failure recovery over functional-unit knowledge graphs.

pub mod kg;
pub mod monitor;
pub mod fm;
pub mod harness;
pub mod par;
pub mod pddl;
pub mod recovery;
pub mod retrieval;
pub mod sim;
