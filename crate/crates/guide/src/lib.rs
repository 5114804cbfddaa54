//! The Rust listings in `book/src` run as doctests of this crate.
//! Each chapter gets its own module so a failure names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/units.md")]
pub mod units {}
#[doc = include_str!("../../../book/src/weak-lattice.md")]
pub mod weak_lattice {}
#[doc = include_str!("../../../book/src/coherences.md")]
pub mod coherences {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}
#[doc = include_str!("../../../book/src/phonons.md")]
pub mod phonons {}
#[doc = include_str!("../../../book/src/optics.md")]
pub mod optics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/acceptance.md")]
pub mod acceptance {}
