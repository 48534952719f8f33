//! Deterministic derivation of random streams from a single root seed.
//!
//! A root seed keys one ChaCha8 generator. Every independent piece of work
//! (a Monte Carlo trial, a write train, a bootstrap replicate) gets its own
//! 64-bit stream number, built as
//!
//! ```text
//! stream = domain << 40 | index
//! ```
//!
//! where `domain` tags the purpose (chain trials, heralding trains, fringe
//! phase k, ...) and `index` counts work items inside it. Within a stream,
//! fixed word offsets split the randomness of one write train into regions
//! (see [`Region`]) so that the draws belonging to mode `j` do not move when
//! the number of modes changes. Results are therefore a pure function of
//! `(root, domain, index)` and never of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INDEX_BITS: u32 = 40;

/// Purpose tag mixed into a stream number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Domain(u32);

impl Domain {
    pub const ELEMENTARY_LINK: Domain = Domain(1);
    pub const CHAIN: Domain = Domain(2);
    pub const PMN_TRAINS: Domain = Domain(3);
    pub const BOOTSTRAP: Domain = Domain(4);
    pub const SYNTHETIC: Domain = Domain(5);

    /// Trains used for the interference scan at phase setting `k`.
    pub fn fringe_phase(k: u32) -> Domain {
        Domain(0x100 + k)
    }

    /// Independent heralding runs, one per multiplexed mode count.
    pub fn mode_scan(n_modes: u32) -> Domain {
        Domain(0x10_0000 + n_modes)
    }

    pub fn custom(tag: u32) -> Domain {
        Domain(tag)
    }
}

/// Keyed generator from which per-item streams are cut.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(root_seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(root_seed),
        }
    }

    /// The stream for work item `index` of `domain`, positioned at word 0.
    pub fn stream(&self, domain: Domain, index: u64) -> ChaCha8Rng {
        debug_assert!(index < (1 << INDEX_BITS), "work index overflows stream layout");
        let mut rng = self.base.clone();
        rng.set_stream(((domain.0 as u64) << INDEX_BITS) | index);
        rng.set_word_pos(0);
        rng
    }
}

/// Word offsets of the randomness regions inside one write-train stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Spin-wave excitation of every (mode, node) slot, consumed in order.
    Excitation,
    /// Stokes survival, beam-splitter routing and dark clicks of window `i`.
    Herald(usize),
    /// Retrieval of the spin waves stored in mode `i`.
    Readout(usize),
    /// Draws that belong to the whole train rather than to a mode.
    Train,
}

const REGION_STRIDE: u128 = 64;

impl Region {
    pub fn word_pos(self) -> u128 {
        match self {
            Region::Excitation => 0,
            Region::Herald(i) => (1 << 36) + i as u128 * REGION_STRIDE,
            Region::Readout(i) => (2 << 36) + i as u128 * REGION_STRIDE,
            Region::Train => 3 << 36,
        }
    }
}

/// Moves `rng` to the start of `region`.
pub fn seek(rng: &mut ChaCha8Rng, region: Region) {
    // Repositioning refills the block buffer, so skip it when already there.
    let target = region.word_pos();
    if rng.get_word_pos() != target {
        rng.set_word_pos(target);
    }
}
