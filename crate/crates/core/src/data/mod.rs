//! File formats, preprocessing and synthetic data.

mod csv_io;
mod model_file;
mod pca;
mod synthetic;

pub use csv_io::{load_features, load_features_with_views, save_features};
pub use model_file::{
    load_model, model_from_str, model_to_string, save_model, MODEL_MAGIC, MODEL_VERSION,
};
pub use pca::{pca_reduce, Pca};
pub use synthetic::{
    generate_synthetic, generate_synthetic_with_truth, split_identities, SyntheticData,
    SyntheticSpec,
};
