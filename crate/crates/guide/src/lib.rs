//! Doc-test shim for the book.
//!
//! mdbook cannot execute snippets that depend on workspace crates, so every
//! chapter is included here as module documentation and `cargo test --doc`
//! runs the code blocks. One module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/identification.md")]
pub mod identification {}

#[doc = include_str!("../../../book/src/surrogates.md")]
pub mod surrogates {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/control.md")]
pub mod control {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
