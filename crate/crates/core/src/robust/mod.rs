//! Noise-robust training objectives as pure functions: contrastive losses
//! with analytic gradients, label guessing, positive-pair indicators, mixup
//! draws and the equal-share batch sampler.

pub mod gradcheck;
mod labels;
mod losses;
mod sampling;
mod sims;

pub use labels::{entropy, guess_label, mixup_draw, mixup_draw_with, pair_permutation};
pub use losses::{loss_ce_mixup, loss_guided_contrastive, loss_unsup, loss_unsup_mixup, total_loss, LossGrad};
pub use sampling::{BatchIndices, EqualSampler};
pub use sims::{compute_sims, SampleTag, SimMatrix};
