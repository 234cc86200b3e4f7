//! trendsum: interpretable trend detection, policy-based utility modeling,
//! and template-based natural-language summaries for numeric time series.
//!
//! The pipeline detects trends (linear segments, jumps, cycles, anomalies,
//! a statistical aggregate), encodes each as a fixed-length feature vector,
//! learns which trends belong in a summary via latent policies (linear
//! separators combined through boolean structures, with a probabilistic
//! classifier head), ranks trends by inferred utility, and renders the top
//! trends as text.

pub mod detect;
pub mod error;
pub mod features;
pub mod infer;
pub mod learn;
pub mod metrics;
pub mod pipeline;
pub mod policy;
pub mod series;
pub mod summarize;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
