//! Finite prefixes, generators and budgeted partial rules.

mod descriptor;
mod generator;
mod prefix;

pub use descriptor::{GeneratorDescriptor, PartialDescriptor};
pub use generator::{
    evaluate_budgeted, evaluate_prefix, Budgeted, DelayRule, Formula, Generator, GeneratorKind,
    GeneratorLibrary, Library, Membership, PartialGenerator, PartialLibrary,
};
pub(crate) use generator::in_rn;
pub use prefix::{pointwise, BitPrefix, SetOp};

/// Default cap on materialized prefix lengths (`2^22` bits).
pub const DEFAULT_PREFIX_CAP: usize = 1 << 22;
