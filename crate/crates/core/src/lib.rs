//! Event detection and burst analysis for social media streams.
//!
//! The pipeline mines keyword pairs from news headlines, groups them into
//! events through a keyword co-occurrence graph, and describes each event
//! by how its message interarrival times fall on a learned codebook. Events
//! are then clustered into activity tiers, characterized with a catalog of
//! features, and a logistic-regression classifier predicts the
//! high-activity tier from the earliest messages of an event.
//!
//! ```
//! use vqevent::vq_model::{learn_codebook, quantize, InterarrivalSeries};
//!
//! let fast = InterarrivalSeries::from_timestamps("fast", &[0, 0, 1, 1, 2, 2])?;
//! let slow = InterarrivalSeries::from_timestamps("slow", &[0, 300, 900, 1500])?;
//! let codebook = learn_codebook(&[fast.clone(), slow.clone()], 3, 7)?;
//! let v = quantize(&fast, &codebook)?;
//! assert!(v.weights[0] > 0.9);
//! # Ok::<(), vqevent::Error>(())
//! ```

pub mod activity_cluster;
pub mod classifier;
pub mod corpus;
mod error;
pub mod event_graph;
pub mod features;
pub mod keyword_mining;
pub mod kmeans;
pub mod stats;
pub mod store;
pub mod synth;
pub mod text;
pub mod vq_model;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream `stream` of the generator seeded with
/// `seed`.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/events.md")]
    mod events {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/codebook.md")]
    mod codebook {}
    #[doc = include_str!("../../../book/src/tiers.md")]
    mod tiers {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
