//! Contrastive imitation learning for language-conditioned tabletop
//! manipulation, end to end at desk scale: a deterministic toy simulator
//! produces keyframe demonstrations, a policy built from virtual-view
//! rendering, patch-token encoding, query-transformer fusion, and heatmap
//! action decoding is trained with a combined behavior-cloning +
//! contrastive objective, and evaluated for multi-task success and
//! embedding separation.
//!
//! Everything is 64-bit and deterministic: a fixed seed reproduces the
//! dataset, the training run, and the evaluation bitwise. The `parallel`
//! feature (default on) runs data-parallel inner loops on rayon; outputs
//! are identical with or without it.

pub mod act;
pub mod cil;
pub mod config;
pub mod data;
pub mod encode;
pub mod geom;
pub mod lang;
pub mod model;
pub mod mvq;
pub mod par;
pub mod render;
pub mod seeds;
pub mod sim;
pub mod tensor;
pub mod train;
