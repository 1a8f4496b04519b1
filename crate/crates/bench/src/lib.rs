//! Fixtures shared by the benchmarks.

use rehabxai_core::dataset::{generate_synthetic, SynthConfig};
use rehabxai_core::model::LabeledSet;
use rehabxai_core::{Component, ModelConfig, TrainedModel};

/// A trained default model over a default-sized synthetic set.
pub fn fixture(component: Component) -> (LabeledSet, TrainedModel) {
    let d = generate_synthetic(&SynthConfig::default(), 7).expect("synthetic data");
    let set = LabeledSet::from_dataset(&d, component).expect("labeled set");
    let model = set.fit_all(&ModelConfig::default_for(component)).expect("trained model");
    (set, model)
}
