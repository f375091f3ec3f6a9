//! Simulation core: scenarios, the rule-based client, the student model,
//! the mentor agent, event-sourced sessions and the analytics over them.

pub mod analysis;
pub mod annotation;
pub mod client;
pub mod discourse;
pub mod clock;
pub mod pharmacist;
pub mod scenario;
pub mod scoring;
pub mod session;
pub mod student_model;
pub mod synthetic;
