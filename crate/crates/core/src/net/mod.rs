//! The DABNet graph: depth-wise asymmetric bottleneck modules, the two DAB
//! blocks with inter-block concatenation, the downsampling blocks, and the
//! long-range image shortcuts.
//!
//! The graph is written once, in [`graph`], against the [`graph::Executor`]
//! trait. Running it with tensors is inference; running it with shape
//! traces yields parameter/MAC/receptive-field reports and the list of
//! weights a [`WeightStore`] must hold.

mod forward;
pub(crate) mod graph;
mod spec;
mod weights;

pub use forward::{
    dab_module_forward, dabnet_forward, dabnet_forward_traced, downsample_block, init_random_weights,
    predict_labels,
};
pub use spec::{DabModuleSpec, NetworkSpec};
pub use weights::{required_weights, WeightStore};
