// mdbook cannot link code listings against a crate, so every chapter is
// pulled into this library as a module doc comment and `cargo test --doc`
// runs the listings. One module per chapter keeps failures attributable.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/disks.md")]
pub mod disks {}
#[doc = include_str!("src/structures.md")]
pub mod structures {}
#[doc = include_str!("src/deformation.md")]
pub mod deformation {}
#[doc = include_str!("src/injectivity.md")]
pub mod injectivity {}
#[doc = include_str!("src/pseudonorms.md")]
pub mod pseudonorms {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
