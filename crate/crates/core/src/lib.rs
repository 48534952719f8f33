//! Models and estimators for temporally multiplexed DLCZ quantum repeater links.
//!
//! The crate is organised around the life of an entangled pair:
//!
//! * [`link`] samples one multiplexed write train, heralds entanglement by
//!   single-photon interference and reads the stored spin waves back out,
//!   with photon loss, dark counts and inter-mode crosstalk. A closed-form
//!   counterpart ([`link::analytic`]) evaluates the same model exactly.
//! * [`metrics`] turns coincidence counts into concurrence, fringe visibility
//!   and intrinsic retrieval efficiency.
//! * [`fit`] holds the small least-squares fitters used on decay curves,
//!   mode-scaling data and interference fringes.
//! * [`rate`] evaluates the mean-time recursion for a nested swapping chain
//!   and the resulting end-to-end rate.
//! * [`chain`] is the discrete-event Monte Carlo of the same chain.
//! * [`experiment`] strings the link pieces together into storage-time and
//!   mode-count scans.
//!
//! Every stochastic routine takes an explicit seed and derives its random
//! streams from it through [`rng`], so results do not depend on thread
//! count or scheduling.
//!
//! ```
//! use dlcz_repeater::rate::{swap_chain, ChainParams};
//!
//! let report = swap_chain(&ChainParams::default()).unwrap();
//! assert!(report.rate_hz > 1.0);
//! ```

pub mod chain;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod link;
pub mod metrics;
pub mod rate;
pub mod rng;
pub mod sweep;

pub use error::ParamError;

// The guide under `book/` is compiled as doctests so its snippets cannot rot.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/link_model.md")]
    mod link_model {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/repeater_rate.md")]
    mod repeater_rate {}
    #[doc = include_str!("../../../book/src/chain_sim.md")]
    mod chain_sim {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
