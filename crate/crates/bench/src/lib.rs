//! Fixtures shared by the criterion benches.

use vega_core::{generate_bundle, DatasetBundle, SynthConfig};

/// A synthetic bundle with `classes` classes, `dims` features and ten
/// images per class.
pub fn fixture(classes: usize, dims: usize) -> DatasetBundle {
    generate_bundle(&SynthConfig {
        classes,
        dims,
        images: classes * 10,
        alpha: 0.6,
        seed: 17,
        ..SynthConfig::default()
    })
    .expect("valid fixture config")
}
