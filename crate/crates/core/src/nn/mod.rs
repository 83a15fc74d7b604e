//! Feed-forward networks and the column-wise model-error corrector.

mod corrector;
mod net;

pub use corrector::{
    column_predictors, position_features, ColumnCorrector, CorrectorJacobian, Normalization, N_OUTPUTS, N_PREDICTORS,
};
pub(crate) use net::{ad_cached, forward_cached, work_len};
pub use net::{
    ad_input, ad_params, forward, init_weights, tl_input, tl_params, Activation, LayerSpec, NetSpec, WeightVector,
};
