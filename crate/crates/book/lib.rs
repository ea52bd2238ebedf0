// mdbook cannot run snippets that depend on a workspace crate, so every
// chapter is pulled in as the doc comment of an empty module and rustdoc
// tests the code blocks. One module per chapter keeps failures traceable.

#[doc = include_str!("../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../book/src/network.md")]
pub mod network {}
#[doc = include_str!("../../book/src/box.md")]
pub mod boxes {}
#[doc = include_str!("../../book/src/encoding.md")]
pub mod encoding {}
#[doc = include_str!("../../book/src/simplification.md")]
pub mod simplification {}
#[doc = include_str!("../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../book/src/explaining.md")]
pub mod explaining {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
