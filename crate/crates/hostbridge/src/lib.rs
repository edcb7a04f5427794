//! Tooling around the hostbridge guest framework: bundled example
//! functions, an in-process host session, the call-overhead benchmark,
//! project scaffolding with registration code generation, and the snippet
//! embedder.

pub mod bench;
pub mod embed;
pub mod examples;
pub mod framework;
pub mod registration;
pub mod scaffold;
pub mod session;
