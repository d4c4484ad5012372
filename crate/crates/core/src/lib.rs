//! Probabilistic bisimilarity, robust probabilistic bisimilarity and
//! probabilistic bisimilarity distances for finite labelled Markov chains.
//!
//! ```
//! use robust_bisim::{bisimilarity, build_example, robust_bisimilarity, ExampleFamily, FamilyKind};
//!
//! let chain = build_example(&ExampleFamily::from_ratio(FamilyKind::RandomWalk, 0, 1).unwrap());
//! let (h4, h5) = (0, 2);
//! assert!(bisimilarity(&chain).same_block(h4, h5));
//! assert!(!robust_bisimilarity(&chain).same_block(h4, h5));
//! ```

pub mod bisim;
pub mod chain;
pub mod classify;
pub mod cli;
pub mod coupling;
pub mod distance;
pub mod harness;
mod linsolve;
pub mod probability;
pub mod relation;
pub mod robust;
pub mod transport;

pub use bisim::{bisim, bisimilarity, quotient};
pub use chain::{ChainOptions, Distribution, LabelledMarkovChain, ModelError, State};
pub use classify::{classify_pairs, PairClass, PairClassification};
pub use coupling::{maximal_support_coupling, Coupling, SubDistribution};
pub use distance::{delta, delta_with_options, extract_policy, policy_value, DistanceMatrix, DistanceOptions, Policy};
pub use harness::{build_example, sweep, ExampleFamily, FamilyKind, SweepRow};
pub use probability::Probability;
pub use relation::{PairRelation, Partition};
pub use robust::{filter, prune, refine, robust_bisimilarity};
pub use transport::{min_transport, min_transport_value};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/bisimilarity.md")]
    mod bisimilarity {}
    #[doc = include_str!("../../../book/src/robust.md")]
    mod robust {}
    #[doc = include_str!("../../../book/src/distances.md")]
    mod distances {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
