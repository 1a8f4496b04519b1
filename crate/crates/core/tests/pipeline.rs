//! Synthetic data through training, explanation, a full study session and its analysis.

use rehabxai_core::dataset::{generate_synthetic, loso_splits, SynthConfig};
use rehabxai_core::explain::{
    build_embedding_space, explain_case, ComponentInputs, ExplainOptions, NeighborEmbeddingParams, ProjectionMethod,
    Representation,
};
use rehabxai_core::model::{evaluate_loso_on, fold_model, LabeledSet, LosoOptions};
use rehabxai_core::study::{
    analyze_events, create_session, export_events, parse_events, Assessment, Phase, StudyConfig, TruthTable,
};
use rehabxai_core::{Component, Label, ModelConfig};

#[test]
fn session_over_synthetic_data() {
    let d = generate_synthetic(&SynthConfig { n_subjects: 8, ..Default::default() }, 3).unwrap();
    let splits = loso_splits(&d).unwrap();
    // A weak ROM model so the case pool holds enough wrong outputs.
    let rom_config = ModelConfig {
        n_hidden_layers: 1,
        hidden_units: 32,
        learning_rate: 1e-4,
        epochs: 1,
        ..ModelConfig::default_for(Component::Rom).with_seed(1)
    };
    let configs = [rom_config, ModelConfig::default_for(Component::Comp).with_seed(1)];

    let mut built = Vec::new();
    for config in &configs {
        let set = LabeledSet::from_dataset(&d, config.component).unwrap();
        let loso = evaluate_loso_on(&set, &splits, config, LosoOptions::default()).unwrap();
        let model = set.fit_all(config).unwrap();
        let space = build_embedding_space(
            &model,
            config.component.as_str(),
            &set,
            ProjectionMethod::Pca,
            Representation::FirstHidden,
            &NeighborEmbeddingParams::default(),
        )
        .unwrap();
        built.push((set, loso, model, space));
    }

    let mut session = create_session("p1", &built[0].1, 4, &StudyConfig::default()).unwrap();
    let mut t = 0.0;
    for ci in 0..2 {
        let condition = session.order[ci];
        for case in session.assignments[ci].cases.clone() {
            let subject = &d.trial(&case.trial_id).unwrap().subject_id;
            let case_models: Vec<_> = built
                .iter()
                .zip(&configs)
                .map(|((set, ..), config)| fold_model(set, &splits, subject, config).unwrap())
                .collect();
            let inputs: Vec<ComponentInputs> = built
                .iter()
                .zip(&case_models)
                .map(|((set, loso, model, space), cm)| ComponentInputs {
                    model_id: "m",
                    set,
                    space_model: model,
                    space,
                    loso,
                    case_model: cm,
                })
                .collect();
            let options = ExplainOptions { include_examples: condition.shows_examples(), ..Default::default() };
            let payload = explain_case(&d, &case.trial_id, &inputs[0], &inputs[1], &options).unwrap();
            assert_eq!(payload.examples.is_some(), condition.shows_examples());

            for decision in &payload.decision {
                let loso = &built.iter().find(|b| b.1.component == decision.component).unwrap().1;
                assert_eq!(decision.prediction, loso.get(&case.trial_id).unwrap().predicted);
                for (phase, label, dt) in
                    [(Phase::Initial, Label::Correct, 20.0), (Phase::Final, decision.prediction, 50.0)]
                {
                    session
                        .record_assessment(Assessment {
                            session_id: session.session_id.clone(),
                            case_id: case.trial_id.clone(),
                            component: decision.component,
                            phase,
                            label,
                            t_video_start: t,
                            t_submit: t + dt,
                        })
                        .unwrap();
                }
            }
            t += 100.0;
        }
    }
    assert!(session.is_complete());

    let truth = TruthTable::from_loso([&built[0].1, &built[1].1]);
    let log = export_events(std::slice::from_ref(&session), &truth).unwrap();
    let events = parse_events(&log).unwrap();
    assert_eq!(events.len(), 2 * 16 * 2);
    let report = analyze_events(&events).unwrap();
    assert_eq!(report.conditions.len(), 2);
    for c in &report.conditions {
        // Every final label copied the AI output.
        let counts = c.decisions.counts;
        assert_eq!((counts.reject_right, counts.reject_wrong), (0, 0));
        assert_eq!(counts.agree_right + counts.agree_wrong, 16);
        assert!((c.duration.mean_initial_seconds.unwrap() - 20.0).abs() < 1e-9);
    }
}
