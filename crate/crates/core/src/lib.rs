//! Interactive predicate and operator learning for tabletop task planning.
//!
//! A teacher explains goals and action failures in language; the learner
//! turns each explanation into executable predicates, labels and action
//! preconditions, induces lifted operators from its own transitions, and
//! plans with the resulting PDDL domain.

pub mod agent;
pub mod dsl;
pub mod eval;
pub mod learn;
pub mod oracle;
pub mod pddl;
pub mod tasks;
pub mod teacher;
pub mod world;
