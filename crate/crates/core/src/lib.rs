//! Finite-horizon tools for asymptotic density and coarse computability.
//!
//! Sets of naturals are handled through finite prefixes ([`BitPrefix`]) and
//! declared deterministic rules ([`Generator`], [`PartialGenerator`]).  On top
//! of that the crate provides exact-rational density profiles and windowed
//! liminf/limsup estimates, the `R(A)` and factorial-interval codings with
//! their decoders, the trust-based merge of approximating families, the
//! diagonal adversary and the two stage-by-stage permitting simulators.

pub mod adversary;
pub mod bitseq;
pub mod codings;
pub mod decoders;
pub mod density;
mod error;
pub mod ratio;
pub mod stagecraft;
pub mod trust;

pub use bitseq::{
    pointwise, BitPrefix, Budgeted, DelayRule, Generator, GeneratorDescriptor, GeneratorKind,
    GeneratorLibrary, Library, Membership, PartialDescriptor, PartialGenerator, PartialLibrary,
    SetOp,
};
pub use density::{Density, DensityEstimate, DensityProfile, DyadicProfile};
pub use error::{Error, Result};
