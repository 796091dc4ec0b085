//! Base multi-label cosine classifier and the three ways of extending it to
//! novel classes: prototypes, a learned weight generator, and per-class
//! logistic regression.

mod base;
mod checkpoint;
mod data;
mod dfsl;
mod joint;
pub mod linalg;
mod lr;
mod prototype;

pub use base::{train_base, BaseClassifier, BaseTrainConfig, EpochLog, TrainLog};
pub use checkpoint::{
    load_base, load_generator, load_lr_models, save_base, save_generator, save_lr_models,
};
pub use data::LabeledSet;
pub use dfsl::{
    dfsl_generate, dfsl_train_episodic, episode_loss, episode_loss_grad, sample_episode,
    AttentionMode, Episode, EpisodicConfig, EpisodicLog, WeightGenerator,
};
pub use joint::{predict_joint, Method, NovelModel};
pub use linalg::Matrix;
pub use lr::{
    balanced_weights, fit_logistic, lr_fit, lr_objective, LrConfig, LrFit, LrModel,
};
pub use prototype::prototype_weight;
