pub mod annotation;
pub mod events;
pub mod knowledge;
pub mod structuring;
pub mod synthesis;
pub mod pddl;
pub mod harness;
