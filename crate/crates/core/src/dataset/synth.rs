//! Synthetic wrist-to-mouth cohort generator.
//!
//! The affected arm's reach fraction scales with `1 - impairment`; the torso and
//! head drift laterally away from the affected side in proportion to
//! `compensation`. Ground-truth labels come straight from those generation
//! parameters via fixed thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Annotation, Component, Dataset, ExerciseTrial, Joint, JointFrame, Label, Laterality, Point3, Side, SubjectProfile,
};
use crate::error::{Error, Result};

pub const GROUND_TRUTH_ANNOTATOR: &str = "therapist_1";
pub const SECOND_ANNOTATOR: &str = "therapist_2";

/// Peak lateral head displacement at compensation = 1, in meters.
const MAX_COMPENSATION_M: f64 = 0.12;
/// Per-trial reach jitter around `1 - impairment`.
const REACH_JITTER: f64 = 0.06;
const COMPENSATION_JITTER: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_side: u32,
    pub frames_per_trial: usize,
    pub frame_rate_hz: f64,
    pub noise_std_m: f64,
    /// Per-subject impairment in [0, 1]; drawn uniformly from [0, 0.6] when absent.
    pub impairment: Option<Vec<f64>>,
    /// Per-subject compensation in [0, 1]; drawn uniformly from [0, 1] when absent.
    pub compensation: Option<Vec<f64>>,
    /// Probability that the second annotator flips a ground-truth label.
    pub disagreement_prob: f64,
    /// ROM is correct iff the achieved reach fraction is at least this.
    pub rom_ratio_threshold: f64,
    /// COMP is correct iff peak head displacement is below this (meters).
    pub comp_displacement_threshold_m: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 15,
            trials_per_side: 10,
            frames_per_trial: 120,
            frame_rate_hz: 30.0,
            noise_std_m: 0.005,
            impairment: None,
            compensation: None,
            disagreement_prob: 0.15,
            rom_ratio_threshold: 0.8,
            comp_displacement_threshold_m: 0.05,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_subjects < 1 {
            return Err(Error::Config("n_subjects must be at least 1".into()));
        }
        if self.trials_per_side < 1 {
            return Err(Error::Config("trials_per_side must be at least 1".into()));
        }
        if self.frames_per_trial < 2 {
            return Err(Error::Config("frames_per_trial must be at least 2".into()));
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return Err(Error::Config("frame_rate_hz must be positive".into()));
        }
        if !(self.noise_std_m >= 0.0 && self.noise_std_m.is_finite()) {
            return Err(Error::Config("noise_std_m must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.disagreement_prob) {
            return Err(Error::Config("disagreement_prob must lie in [0, 1]".into()));
        }
        for (name, values) in [("impairment", &self.impairment), ("compensation", &self.compensation)] {
            if let Some(v) = values {
                if v.len() != self.n_subjects {
                    return Err(Error::Config(format!(
                        "{name} has {} entries for {} subjects",
                        v.len(),
                        self.n_subjects
                    )));
                }
                if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::Config(format!("{name} values must lie in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

struct Body {
    scale: f64,
    offset: Point3,
    affected: Laterality,
}

impl Body {
    fn at(&self, p: Point3) -> Point3 {
        [self.offset[0] + self.scale * p[0], self.offset[1] + self.scale * p[1], self.offset[2] + self.scale * p[2]]
    }

    fn shoulder_x(side: Laterality) -> f64 {
        match side {
            Laterality::Left => -0.18,
            Laterality::Right => 0.18,
        }
    }
}

fn lerp(a: Point3, b: Point3, t: f64) -> Point3 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn shift_x(p: Point3, dx: f64) -> Point3 {
    [p[0] + dx, p[1], p[2]]
}

/// Generates one trial's frames. `reach` is the fraction of the rest-to-mouth
/// path covered at the peak; `lean_m` is the peak lateral head displacement.
fn trial_frames(
    body: &Body,
    arm: Laterality,
    reach: f64,
    lean_m: f64,
    cfg: &SynthConfig,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<JointFrame> {
    let n = cfg.frames_per_trial;
    let lean_dir = match body.affected {
        Laterality::Left => 1.0,
        Laterality::Right => -1.0,
    };

    let head = body.at([0.0, 1.60, 0.0]);
    let spine = body.at([0.0, 1.20, 0.0]);
    let mouth = body.at([0.0, 1.50, 0.10]);

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let phase = i as f64 / (n - 1) as f64;
        let s = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos());
        let lean = lean_dir * lean_m * s;

        let mut frame = JointFrame { time_s: i as f64 / cfg.frame_rate_hz, positions: [[0.0; 3]; Joint::COUNT] };
        frame.set(Joint::Head, shift_x(head, lean));
        frame.set(Joint::Spine, shift_x(spine, 0.5 * lean));

        for side in [Laterality::Left, Laterality::Right] {
            let sx = Body::shoulder_x(side);
            let shoulder = body.at([sx, 1.42, 0.0]);
            let elbow_rest = body.at([sx, 1.14, 0.0]);
            let wrist_rest = body.at([sx, 0.88, 0.02]);
            let (elbow, wrist) = if side == arm {
                let elbow_peak = body.at([sx + 0.04 * sx.signum(), 1.28, 0.22]);
                (lerp(elbow_rest, elbow_peak, reach * s), lerp(wrist_rest, mouth, reach * s))
            } else {
                (elbow_rest, wrist_rest)
            };
            let dx = 0.8 * lean;
            frame.set(Joint::shoulder(side), shift_x(shoulder, dx));
            frame.set(Joint::elbow(side), shift_x(elbow, dx));
            frame.set(Joint::wrist(side), shift_x(wrist, dx));
        }

        // Noise is always drawn so the random stream does not depend on noise_std_m.
        for p in frame.positions.iter_mut() {
            for v in p.iter_mut() {
                *v += noise.sample(rng);
            }
        }
        frames.push(frame);
    }
    frames
}

/// Builds a synthetic cohort. Pure function of `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let noise = Normal::new(0.0, config.noise_std_m).map_err(|e| Error::Config(format!("noise_std_m: {e}")))?;

    let mut params_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = Dataset { ground_truth_annotator: GROUND_TRUTH_ANNOTATOR.to_string(), ..Default::default() };

    for s in 0..config.n_subjects {
        let drawn_impairment: f64 = params_rng.random_range(0.0..0.6);
        let drawn_compensation: f64 = params_rng.random_range(0.0..1.0);
        let impairment = config.impairment.as_ref().map_or(drawn_impairment, |v| v[s]);
        let compensation = config.compensation.as_ref().map_or(drawn_compensation, |v| v[s]);
        let affected = if params_rng.random_bool(0.5) { Laterality::Left } else { Laterality::Right };
        let body = Body {
            scale: params_rng.random_range(0.9..1.1),
            offset: [params_rng.random_range(-0.2..0.2), 0.0, params_rng.random_range(1.8..2.2)],
            affected,
        };

        let subject_id = format!("S{:02}", s + 1);
        let side_name = match affected {
            Laterality::Left => "left",
            Laterality::Right => "right",
        };
        dataset.subjects.push(SubjectProfile {
            subject_id: subject_id.clone(),
            status_score: 1.0 - impairment,
            affected_side: affected,
            description: format!(
                "Synthetic post-stroke survivor, {side_name} side affected, functional status {:.2}",
                1.0 - impairment
            ),
        });

        let mut trial_rng = ChaCha8Rng::seed_from_u64(seed);
        trial_rng.set_stream(s as u64 + 1);

        for side in [Side::Affected, Side::Unaffected] {
            for k in 1..=config.trials_per_side {
                let u: f64 = trial_rng.random_range(-1.0..1.0);
                let v: f64 = trial_rng.random_range(-1.0..1.0);
                let flip_rom = trial_rng.random_bool(config.disagreement_prob);
                let flip_comp = trial_rng.random_bool(config.disagreement_prob);

                let (reach, lean_m) = match side {
                    Side::Affected => (
                        (1.0 - impairment + REACH_JITTER * u).clamp(0.0, 1.0),
                        (compensation * MAX_COMPENSATION_M * (1.0 + COMPENSATION_JITTER * v)).max(0.0),
                    ),
                    Side::Unaffected => ((1.0 - REACH_JITTER * u.abs()).clamp(0.0, 1.0), 0.0),
                };

                let arm = match side {
                    Side::Affected => affected,
                    Side::Unaffected => affected.opposite(),
                };
                let frames = trial_frames(&body, arm, reach, lean_m, config, &noise, &mut trial_rng);
                let trial_id = format!("{subject_id}-{}-{k:02}", if side == Side::Affected { "A" } else { "U" });

                let rom = if reach >= config.rom_ratio_threshold { Label::Correct } else { Label::Impaired };
                let comp = if lean_m < config.comp_displacement_threshold_m { Label::Correct } else { Label::Impaired };
                for (component, label, flip) in [(Component::Rom, rom, flip_rom), (Component::Comp, comp, flip_comp)] {
                    dataset.annotations.push(Annotation {
                        trial_id: trial_id.clone(),
                        component,
                        annotator_id: GROUND_TRUTH_ANNOTATOR.to_string(),
                        label,
                    });
                    dataset.annotations.push(Annotation {
                        trial_id: trial_id.clone(),
                        component,
                        annotator_id: SECOND_ANNOTATOR.to_string(),
                        label: if flip { label.flipped() } else { label },
                    });
                }

                dataset.trials.push(ExerciseTrial {
                    trial_id,
                    subject_id: subject_id.clone(),
                    side,
                    trial_index: k,
                    frames,
                });
            }
        }
    }

    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SynthConfig {
        SynthConfig { n_subjects: n, trials_per_side: 3, frames_per_trial: 30, ..Default::default() }
    }

    #[test]
    fn canonical_cohort_shape() {
        let d = generate_synthetic(&SynthConfig::default(), 7).unwrap();
        assert_eq!(d.subjects.len(), 15);
        assert_eq!(d.trials.len(), 300);
        for c in Component::ALL {
            assert_eq!(d.ground_truth(c).len(), 300);
        }
    }

    #[test]
    fn unimpaired_limit_all_correct() {
        let cfg = SynthConfig {
            impairment: Some(vec![0.0; 4]),
            compensation: Some(vec![0.0; 4]),
            noise_std_m: 0.0,
            ..small(4)
        };
        let d = generate_synthetic(&cfg, 11).unwrap();
        for c in Component::ALL {
            assert!(d.ground_truth(c).values().all(|&l| l == Label::Correct));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic(&small(3), 5).unwrap();
        let b = generate_synthetic(&small(3), 5).unwrap();
        let c = generate_synthetic(&small(3), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_synthetic(&small(0), 1).is_err());
        assert!(generate_synthetic(&SynthConfig { noise_std_m: -1.0, ..small(1) }, 1).is_err());
        assert!(generate_synthetic(&SynthConfig { impairment: Some(vec![0.5]), ..small(2) }, 1).is_err());
        assert!(generate_synthetic(&SynthConfig { compensation: Some(vec![1.5]), ..small(1) }, 1).is_err());
    }

    #[test]
    fn second_annotator_never_disagrees_at_zero_probability() {
        let cfg = SynthConfig { disagreement_prob: 0.0, ..small(3) };
        let d = generate_synthetic(&cfg, 2).unwrap();
        for t in &d.trials {
            for c in Component::ALL {
                assert_eq!(d.annotators_agree(&t.trial_id, c), Some(true));
            }
        }
    }

    fn mean_peak_reach(d: &Dataset) -> f64 {
        // Peak wrist travel from the first frame, averaged over affected-side trials.
        let mut total = 0.0;
        let mut n = 0;
        for t in d.trials.iter().filter(|t| t.side == Side::Affected) {
            let arm = d.subject(&t.subject_id).unwrap().arm_for(t.side);
            let w0 = t.frames[0].get(Joint::wrist(arm));
            let peak = t
                .series(Joint::wrist(arm))
                .map(|w| ((w[0] - w0[0]).powi(2) + (w[1] - w0[1]).powi(2) + (w[2] - w0[2]).powi(2)).sqrt())
                .fold(0.0, f64::max);
            total += peak;
            n += 1;
        }
        total / n as f64
    }

    #[test]
    fn reach_amplitude_non_increasing_in_impairment() {
        let mut prev = f64::INFINITY;
        for step in 0..=10 {
            let imp = step as f64 / 10.0;
            let cfg = SynthConfig {
                impairment: Some(vec![imp]),
                compensation: Some(vec![0.3]),
                noise_std_m: 0.0,
                ..small(1)
            };
            let reach = mean_peak_reach(&generate_synthetic(&cfg, 9).unwrap());
            assert!(reach <= prev + 1e-12, "impairment {imp}: {reach} > {prev}");
            prev = reach;
        }
    }
}
