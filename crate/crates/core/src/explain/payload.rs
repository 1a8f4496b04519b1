//! The combined per-case explanation served to the onboarding interface.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::benchmark::{benchmark_info, BenchmarkInfo};
use super::knn::{Membership, Metric, NeighborSets, DEFAULT_K};
use super::radar::{radar_payload, RadarAxis};
use super::shapley::{channel_groups, per_feature_groups, shapley_attribution, AttributionMode, FeatureAttribution};
use super::space::{EmbeddingSpace, NeighborQuery, SpaceKind};
use crate::dataset::{Component, Dataset, Label, Side};
use crate::error::{Error, Result};
use crate::kinematics::{FeatureRanges, FeatureSchema};
use crate::model::{LabeledSet, LosoReport, TrainedModel};

/// Everything needed to explain one component.
#[derive(Debug, Clone, Copy)]
pub struct ComponentInputs<'a> {
    pub model_id: &'a str,
    pub set: &'a LabeledSet,
    /// Model trained on every sample; it built `space`.
    pub space_model: &'a TrainedModel,
    pub space: &'a EmbeddingSpace,
    pub loso: &'a LosoReport,
    /// Model of the fold that held out the case's subject.
    pub case_model: &'a TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub k: usize,
    pub metric: Metric,
    pub space: SpaceKind,
    /// False under the features-only condition.
    pub include_examples: bool,
    pub attribution: AttributionMode,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            metric: Metric::default(),
            space: SpaceKind::default(),
            include_examples: true,
            attribution: AttributionMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub id: String,
    pub distance: f64,
    pub coords: [f64; 2],
    pub benchmark: BenchmarkInfo,
    pub membership: Membership,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPoint {
    pub id: String,
    pub coords: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentNeighbors {
    pub component: Component,
    pub model_id: String,
    pub k: usize,
    pub metric: Metric,
    pub space: SpaceKind,
    pub query_coords: [f64; 2],
    pub neighbors: Vec<NeighborEntry>,
    pub global: Vec<GlobalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleExplanation {
    pub rom: ComponentNeighbors,
    pub comp: ComponentNeighbors,
    pub sets: NeighborSets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSupport {
    pub component: Component,
    pub prediction: Label,
    pub confidence: f64,
    pub attribution: FeatureAttribution,
    pub top_features: Vec<String>,
    pub radar: Vec<RadarAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub case: String,
    pub subject_id: String,
    pub side: Side,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<ExampleExplanation>,
    pub decision: Vec<DecisionSupport>,
}

fn check_inputs(inputs: &ComponentInputs<'_>, component: Component) -> Result<()> {
    let ok = inputs.set.component == component
        && inputs.space.component == component
        && inputs.loso.component == component
        && inputs.space_model.config.component == component
        && inputs.case_model.config.component == component;
    if ok {
        Ok(())
    } else {
        Err(Error::validation(format!("inputs supplied for {component} mix components")))
    }
}

fn neighbors_for(
    dataset: &Dataset,
    case: &str,
    inputs: &ComponentInputs<'_>,
    options: &ExplainOptions,
) -> Result<(ComponentNeighbors, Vec<String>)> {
    let query = NeighborQuery::trial(case).with_k(options.k).with_metric(options.metric).with_space(options.space);
    let result = inputs.space.knn(inputs.space_model, &query)?;
    let at = inputs.space.index_of(case).ok_or_else(|| Error::NotFound(format!("case `{case}` in embedding space")))?;
    let component = inputs.space.component;
    let ids = result.ids();
    let neighbors = result
        .neighbors
        .into_iter()
        .map(|hit| {
            Ok(NeighborEntry {
                benchmark: benchmark_info(&hit.id, dataset, inputs.loso, component)?,
                id: hit.id,
                distance: hit.distance,
                coords: hit.coords,
                // Filled in once both components are known.
                membership: Membership::Common,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let global = inputs
        .space
        .sample_ids
        .iter()
        .zip(&inputs.space.coords)
        .map(|(id, c)| GlobalPoint { id: id.clone(), coords: *c })
        .collect();
    Ok((
        ComponentNeighbors {
            component,
            model_id: inputs.model_id.to_string(),
            k: options.k,
            metric: options.metric,
            space: options.space,
            query_coords: inputs.space.coords[at],
            neighbors,
            global,
        },
        ids,
    ))
}

fn decision_for(
    dataset: &Dataset,
    case: &str,
    inputs: &ComponentInputs<'_>,
    ranges: &FeatureRanges,
    mode: AttributionMode,
) -> Result<DecisionSupport> {
    let set = inputs.set;
    let component = set.component;
    let i = set.index_of(case).ok_or_else(|| Error::NotFound(format!("case `{case}`")))?;
    let held_out = &set.subject_ids[i];
    let x = &set.features[i].values;

    // Baseline: mean of the samples the case model was trained on.
    let train: Vec<usize> = (0..set.len()).filter(|&j| &set.subject_ids[j] != held_out).collect();
    if train.is_empty() {
        return Err(Error::Insufficient("no training samples outside the case's subject".into()));
    }
    let mut baseline = vec![0.0; x.len()];
    for &j in &train {
        for (b, v) in baseline.iter_mut().zip(&set.features[j].values) {
            *b += v;
        }
    }
    baseline.iter_mut().for_each(|b| *b /= train.len() as f64);

    let schema = FeatureSchema::for_component(component);
    let groups = match mode {
        AttributionMode::Exact => channel_groups(schema),
        AttributionMode::Sampled { .. } => per_feature_groups(&schema.names().collect::<Vec<_>>()),
    };
    let prediction = inputs.case_model.predict(x)?;
    let attribution = shapley_attribution(inputs.case_model, x, &baseline, &groups, mode)?;

    let trial = dataset.trial(case).ok_or_else(|| Error::NotFound(format!("trial `{case}`")))?;
    let other =
        dataset.counterpart(trial).ok_or_else(|| Error::NotFound(format!("opposite-side counterpart of `{case}`")))?;
    let j = set.index_of(&other.trial_id).ok_or_else(|| Error::NotFound(format!("trial `{}`", other.trial_id)))?;
    let (affected, unaffected) = match trial.side {
        Side::Affected => (&set.features[i], &set.features[j]),
        Side::Unaffected => (&set.features[j], &set.features[i]),
    };
    let radar = radar_payload(&attribution.top_features, affected, unaffected, ranges)?;

    Ok(DecisionSupport {
        component,
        prediction: prediction.label,
        confidence: prediction.confidence,
        top_features: attribution.top_features.clone(),
        attribution,
        radar,
    })
}

/// Builds the explanation for one case trial across both components.
pub fn explain_case(
    dataset: &Dataset,
    case: &str,
    rom: &ComponentInputs<'_>,
    comp: &ComponentInputs<'_>,
    options: &ExplainOptions,
) -> Result<ExplanationPayload> {
    check_inputs(rom, Component::Rom)?;
    check_inputs(comp, Component::Comp)?;
    let trial = dataset.trial(case).ok_or_else(|| Error::NotFound(format!("case `{case}`")))?;

    let examples = if options.include_examples {
        let (mut r, rom_ids) = neighbors_for(dataset, case, rom, options)?;
        let (mut c, comp_ids) = neighbors_for(dataset, case, comp, options)?;
        let sets = NeighborSets::partition(&rom_ids, &comp_ids);
        for entry in r.neighbors.iter_mut().chain(c.neighbors.iter_mut()) {
            entry.membership = sets.membership(&entry.id).expect("every neighbor lies in the partition");
        }
        Some(ExampleExplanation { rom: r, comp: c, sets })
    } else {
        None
    };

    let mut decision = Vec::with_capacity(2);
    for inputs in [rom, comp] {
        let ranges = FeatureRanges::from_features(&inputs.set.features)?;
        decision.push(decision_for(dataset, case, inputs, &ranges, options.attribution)?);
    }

    Ok(ExplanationPayload {
        case: case.to_string(),
        subject_id: trial.subject_id.clone(),
        side: trial.side,
        examples,
        decision,
    })
}

/// Every neighbor id appears in exactly one of the three sets, and the sets
/// cover both lists.
pub fn check_partition(examples: &ExampleExplanation) -> bool {
    let s = &examples.sets;
    let common: HashSet<&String> = s.common.iter().collect();
    let ur: HashSet<&String> = s.unique_rom.iter().collect();
    let uc: HashSet<&String> = s.unique_comp.iter().collect();
    let rom: HashSet<&String> = examples.rom.neighbors.iter().map(|n| &n.id).collect();
    let comp: HashSet<&String> = examples.comp.neighbors.iter().map(|n| &n.id).collect();
    common.is_disjoint(&ur)
        && common.is_disjoint(&uc)
        && ur.is_disjoint(&uc)
        && common == rom.intersection(&comp).copied().collect()
        && common.union(&ur).chain(uc.iter()).count() == rom.union(&comp).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, loso_splits, SynthConfig};
    use crate::explain::{build_embedding_space, NeighborEmbeddingParams, ProjectionMethod, Representation};
    use crate::model::{evaluate_loso_on, fold_model, LosoOptions, ModelConfig};

    struct Built {
        set: LabeledSet,
        full: TrainedModel,
        space: EmbeddingSpace,
        loso: LosoReport,
        case_model: TrainedModel,
    }

    fn build(d: &Dataset, component: Component, case_subject: &str) -> Built {
        let set = LabeledSet::from_dataset(d, component).unwrap();
        let cfg = ModelConfig { n_hidden_layers: 1, hidden_units: 16, ..ModelConfig::default_for(component) };
        let splits = loso_splits(d).unwrap();
        let loso = evaluate_loso_on(&set, &splits, &cfg, LosoOptions::default()).unwrap();
        let full = set.fit_all(&cfg).unwrap();
        let space = build_embedding_space(
            &full,
            "m",
            &set,
            ProjectionMethod::Pca,
            Representation::FirstHidden,
            &NeighborEmbeddingParams::default(),
        )
        .unwrap();
        let case_model = fold_model(&set, &splits, case_subject, &cfg).unwrap();
        Built { set, full, space, loso, case_model }
    }

    fn inputs(b: &Built) -> ComponentInputs<'_> {
        ComponentInputs {
            model_id: "m",
            set: &b.set,
            space_model: &b.full,
            space: &b.space,
            loso: &b.loso,
            case_model: &b.case_model,
        }
    }

    #[test]
    fn combined_payload() {
        let d = generate_synthetic(
            &SynthConfig { n_subjects: 3, trials_per_side: 4, frames_per_trial: 30, ..Default::default() },
            9,
        )
        .unwrap();
        let case = "S02-A-01";
        let rom = build(&d, Component::Rom, "S02");
        let comp = build(&d, Component::Comp, "S02");
        let p = explain_case(&d, case, &inputs(&rom), &inputs(&comp), &ExplainOptions::default()).unwrap();

        let ex = p.examples.as_ref().unwrap();
        assert_eq!(ex.rom.neighbors.len(), 5);
        assert_eq!(ex.comp.neighbors.len(), 5);
        assert_eq!(ex.rom.global.len(), d.trials.len());
        assert!(check_partition(ex));
        for n in ex.rom.neighbors.iter().chain(&ex.comp.neighbors) {
            assert_ne!(n.id, case);
            assert_eq!(Some(n.membership), ex.sets.membership(&n.id));
        }

        for (dec, b) in p.decision.iter().zip([&rom, &comp]) {
            let recorded = b.loso.get(case).unwrap();
            assert_eq!((dec.prediction, dec.confidence), (recorded.predicted, recorded.confidence));
            assert_eq!(dec.top_features.len(), 3);
            assert_eq!(dec.radar.len(), 3);
            let total: f64 = dec.attribution.values.iter().sum();
            assert!((total - (dec.attribution.value_at_input - dec.attribution.value_at_baseline)).abs() < 1e-9);
            for axis in &dec.radar {
                assert!((0.0..=1.0).contains(&axis.affected) && (0.0..=1.0).contains(&axis.unaffected));
            }
        }

        let gated = explain_case(
            &d,
            case,
            &inputs(&rom),
            &inputs(&comp),
            &ExplainOptions { include_examples: false, ..Default::default() },
        )
        .unwrap();
        assert!(gated.examples.is_none());
        assert_eq!(gated.decision, p.decision);
        let json = serde_json::to_value(&gated).unwrap();
        assert!(json.get("examples").is_none());

        assert!(explain_case(&d, "nope", &inputs(&rom), &inputs(&comp), &ExplainOptions::default()).is_err());
        assert!(explain_case(&d, case, &inputs(&comp), &inputs(&rom), &ExplainOptions::default()).is_err());
    }
}
