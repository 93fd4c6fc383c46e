//! Symbolic execution for a simply typed language with opaque values.

pub mod delta;
pub mod heap;
pub mod logic;
pub mod syntax;
pub mod machine;
pub mod oracle;
pub mod cex;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/heap.md")]
    mod heap {}
    #[doc = include_str!("../../../book/src/machine.md")]
    mod machine {}
    #[doc = include_str!("../../../book/src/counterexamples.md")]
    mod counterexamples {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
