//! Kinematic channels (joint angles, normalized distances, displacements) and
//! their fixed-length summaries per performance component.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Component, Dataset, ExerciseTrial, Joint, Laterality, Point3};
use crate::error::{Error, Result};

const MIN_RAY_LENGTH_M: f64 = 1e-9;

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Interior angle at `b` between rays b→a and b→c, in degrees.
pub fn joint_angle(a: Point3, b: Point3, c: Point3) -> Result<f64> {
    let u = sub(a, b);
    let v = sub(c, b);
    let (nu, nv) = (norm(u), norm(v));
    if nu < MIN_RAY_LENGTH_M || nv < MIN_RAY_LENGTH_M {
        return Err(Error::Geometry(format!(
            "ray lengths {nu:e} and {nv:e} m; both must be at least {MIN_RAY_LENGTH_M:e} m"
        )));
    }
    // atan2 of |u×v| and u·v stays accurate near 0° and 180°.
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    Ok(norm(cross).atan2(dot).to_degrees())
}

/// A per-frame scalar series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesChannel {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-axis absolute offsets and Euclidean distance between two joints.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDistance {
    pub x: SeriesChannel,
    pub y: SeriesChannel,
    pub z: SeriesChannel,
    pub euclidean: SeriesChannel,
}

fn check_normalizer(normalizer: f64) -> Result<()> {
    if normalizer > 0.0 && normalizer.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("normalizer must be positive, got {normalizer}")))
    }
}

pub fn relative_distance_series(
    trial: &ExerciseTrial,
    a: Joint,
    b: Joint,
    normalizer: f64,
) -> Result<RelativeDistance> {
    check_normalizer(normalizer)?;
    let n = trial.frames.len();
    let (mut xs, mut ys, mut zs, mut es) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for f in &trial.frames {
        let d = sub(f.get(a), f.get(b));
        xs.push(d[0].abs() / normalizer);
        ys.push(d[1].abs() / normalizer);
        zs.push(d[2].abs() / normalizer);
        es.push(norm(d) / normalizer);
    }
    let name = |suffix: &str| format!("{a}_{b}_{suffix}");
    Ok(RelativeDistance {
        x: SeriesChannel { name: name("x"), values: xs },
        y: SeriesChannel { name: name("y"), values: ys },
        z: SeriesChannel { name: name("z"), values: zs },
        euclidean: SeriesChannel { name: name("euclidean"), values: es },
    })
}

/// Per-axis |p_t − p_0| for one joint, divided by `normalizer`.
pub fn displacement_series(trial: &ExerciseTrial, joint: Joint, normalizer: f64) -> Result<[SeriesChannel; 3]> {
    check_normalizer(normalizer)?;
    let origin = trial
        .frames
        .first()
        .ok_or_else(|| Error::Insufficient(format!("trial `{}` has no frames", trial.trial_id)))?
        .get(joint);
    let mut axes: [Vec<f64>; 3] = Default::default();
    for f in &trial.frames {
        let d = sub(f.get(joint), origin);
        for (axis, values) in axes.iter_mut().enumerate() {
            values.push(d[axis].abs() / normalizer);
        }
    }
    let [x, y, z] = axes;
    Ok([
        SeriesChannel { name: format!("{joint}_disp_x"), values: x },
        SeriesChannel { name: format!("{joint}_disp_y"), values: y },
        SeriesChannel { name: format!("{joint}_disp_z"), values: z },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub range: f64,
}

impl Summary {
    fn values(&self) -> [f64; 4] {
        [self.min, self.max, self.mean, self.range]
    }
}

pub fn summarize_series(channel: &SeriesChannel) -> Result<Summary> {
    let v = &channel.values;
    if v.is_empty() {
        return Err(Error::Insufficient(format!("channel `{}` is empty", channel.name)));
    }
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &x in v {
        min = min.min(x);
        max = max.max(x);
        sum += x;
    }
    Ok(Summary { min, max, mean: sum / v.len() as f64, range: max - min })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    Min,
    Max,
    Mean,
    Range,
}

impl SummaryKind {
    pub const ALL: [SummaryKind; 4] = [SummaryKind::Min, SummaryKind::Max, SummaryKind::Mean, SummaryKind::Range];

    pub fn as_str(self) -> &'static str {
        match self {
            SummaryKind::Min => "min",
            SummaryKind::Max => "max",
            SummaryKind::Mean => "mean",
            SummaryKind::Range => "range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub channel: String,
    pub summary: SummaryKind,
}

/// Canonical feature order for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub component: Component,
    pub features: Vec<FeatureSpec>,
    pub schema_hash: String,
}

const ROM_CHANNELS: [&str; 11] = [
    "elbow_flexion",
    "shoulder_flexion",
    "elbow_extension",
    "rel_head_wrist",
    "rel_head_elbow",
    "dist_head_wrist_x",
    "dist_head_wrist_y",
    "dist_head_wrist_z",
    "dist_shoulder_wrist_x",
    "dist_shoulder_wrist_y",
    "dist_shoulder_wrist_z",
];

const COMP_CHANNELS: [&str; 9] = [
    "disp_head_x",
    "disp_head_y",
    "disp_head_z",
    "disp_spine_x",
    "disp_spine_y",
    "disp_spine_z",
    "disp_shoulder_x",
    "disp_shoulder_y",
    "disp_shoulder_z",
];

impl FeatureSchema {
    fn build(component: Component) -> Self {
        let channels: &[&str] = match component {
            Component::Rom => &ROM_CHANNELS,
            Component::Comp => &COMP_CHANNELS,
        };
        let features: Vec<FeatureSpec> = channels
            .iter()
            .flat_map(|&ch| {
                SummaryKind::ALL.into_iter().map(move |s| FeatureSpec {
                    name: format!("{ch}.{}", s.as_str()),
                    channel: ch.to_string(),
                    summary: s,
                })
            })
            .collect();
        let canonical = serde_json::to_vec(&features).expect("feature specs serialize");
        let digest = Sha256::digest(&canonical);
        let schema_hash = hex::encode(&digest[..8]);
        FeatureSchema { component, features, schema_hash }
    }

    pub fn for_component(component: Component) -> &'static FeatureSchema {
        static ROM: OnceLock<FeatureSchema> = OnceLock::new();
        static COMP: OnceLock<FeatureSchema> = OnceLock::new();
        match component {
            Component::Rom => ROM.get_or_init(|| FeatureSchema::build(Component::Rom)),
            Component::Comp => COMP.get_or_init(|| FeatureSchema::build(Component::Comp)),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Source channels in canonical order.
    pub fn channels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for f in &self.features {
            if out.last() != Some(&f.channel.as_str()) {
                out.push(&f.channel);
            }
        }
        out
    }

    /// Feature indices grouped by source channel, in channel order.
    pub fn channel_groups(&self) -> Vec<(String, Vec<usize>)> {
        self.channels()
            .into_iter()
            .map(|ch| {
                let idx = self.features.iter().enumerate().filter(|(_, f)| f.channel == ch).map(|(i, _)| i).collect();
                (ch.to_string(), idx)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub trial_id: String,
    pub component: Component,
    pub schema_hash: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn schema(&self) -> &'static FeatureSchema {
        FeatureSchema::for_component(self.component)
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.schema().names().zip(self.values.iter().copied())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema().index_of(name).map(|i| self.values[i])
    }
}

/// Per-trial extraction context: which arm performed the trial and the
/// subject's body-scale normalizer in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialContext {
    pub arm: Laterality,
    pub normalizer: f64,
}

fn push_summary(out: &mut Vec<f64>, channel: &SeriesChannel) -> Result<()> {
    let s = summarize_series(channel)?;
    if s.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Geometry(format!("channel `{}` produced non-finite values", channel.name)));
    }
    out.extend_from_slice(&s.values());
    Ok(())
}

pub fn extract_rom_features(trial: &ExerciseTrial, ctx: TrialContext) -> Result<FeatureVector> {
    let (shoulder, elbow, wrist) = (Joint::shoulder(ctx.arm), Joint::elbow(ctx.arm), Joint::wrist(ctx.arm));
    let n = trial.frames.len();
    let mut flexion = Vec::with_capacity(n);
    let mut shoulder_flex = Vec::with_capacity(n);
    for f in &trial.frames {
        flexion.push(joint_angle(f.get(shoulder), f.get(elbow), f.get(wrist))?);
        shoulder_flex.push(joint_angle(f.get(Joint::Spine), f.get(shoulder), f.get(elbow))?);
    }
    let extension: Vec<f64> = flexion.iter().map(|a| 180.0 - a).collect();

    let head_wrist = relative_distance_series(trial, Joint::Head, wrist, ctx.normalizer)?;
    let head_elbow = relative_distance_series(trial, Joint::Head, elbow, ctx.normalizer)?;
    let shoulder_wrist = relative_distance_series(trial, shoulder, wrist, ctx.normalizer)?;

    let channels = [
        SeriesChannel { name: "elbow_flexion".into(), values: flexion },
        SeriesChannel { name: "shoulder_flexion".into(), values: shoulder_flex },
        SeriesChannel { name: "elbow_extension".into(), values: extension },
        head_wrist.euclidean,
        head_elbow.euclidean,
        head_wrist.x,
        head_wrist.y,
        head_wrist.z,
        shoulder_wrist.x,
        shoulder_wrist.y,
        shoulder_wrist.z,
    ];
    let schema = FeatureSchema::for_component(Component::Rom);
    let mut values = Vec::with_capacity(schema.len());
    for ch in &channels {
        push_summary(&mut values, ch)?;
    }
    debug_assert_eq!(values.len(), schema.len());
    Ok(FeatureVector {
        trial_id: trial.trial_id.clone(),
        component: Component::Rom,
        schema_hash: schema.schema_hash.clone(),
        values,
    })
}

pub fn extract_comp_features(trial: &ExerciseTrial, ctx: TrialContext) -> Result<FeatureVector> {
    let schema = FeatureSchema::for_component(Component::Comp);
    let mut values = Vec::with_capacity(schema.len());
    for joint in [Joint::Head, Joint::Spine, Joint::shoulder(ctx.arm)] {
        for ch in displacement_series(trial, joint, ctx.normalizer)? {
            push_summary(&mut values, &ch)?;
        }
    }
    Ok(FeatureVector {
        trial_id: trial.trial_id.clone(),
        component: Component::Comp,
        schema_hash: schema.schema_hash.clone(),
        values,
    })
}

pub fn extract_features(trial: &ExerciseTrial, ctx: TrialContext, component: Component) -> Result<FeatureVector> {
    match component {
        Component::Rom => extract_rom_features(trial, ctx),
        Component::Comp => extract_comp_features(trial, ctx),
    }
}

/// Resolves per-trial contexts for a dataset. The normalizer is each subject's
/// mean shoulder-to-spine distance (both shoulders) over the first frame of
/// all of that subject's trials.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    normalizers: HashMap<String, f64>,
    arms: HashMap<String, Laterality>,
}

impl FeatureExtractor {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
        for t in &dataset.trials {
            let f = &t.frames[0];
            let spine = f.get(Joint::Spine);
            let d =
                0.5 * (norm(sub(f.get(Joint::ShoulderLeft), spine)) + norm(sub(f.get(Joint::ShoulderRight), spine)));
            let e = sums.entry(t.subject_id.as_str()).or_default();
            e.0 += d;
            e.1 += 1;
        }
        let mut normalizers = HashMap::new();
        for (subject, (sum, count)) in sums {
            let value = sum / count as f64;
            if value.is_nan() || value <= MIN_RAY_LENGTH_M {
                return Err(Error::Geometry(format!("subject `{subject}` has zero shoulder-to-spine distance")));
            }
            normalizers.insert(subject.to_string(), value);
        }
        let mut arms = HashMap::new();
        for t in &dataset.trials {
            let subject =
                dataset.subject(&t.subject_id).ok_or_else(|| Error::NotFound(format!("subject `{}`", t.subject_id)))?;
            arms.insert(t.trial_id.clone(), subject.arm_for(t.side));
        }
        Ok(Self { normalizers, arms })
    }

    pub fn context(&self, trial: &ExerciseTrial) -> Result<TrialContext> {
        let normalizer = *self
            .normalizers
            .get(&trial.subject_id)
            .ok_or_else(|| Error::NotFound(format!("normalizer for subject `{}`", trial.subject_id)))?;
        let arm =
            *self.arms.get(&trial.trial_id).ok_or_else(|| Error::NotFound(format!("trial `{}`", trial.trial_id)))?;
        Ok(TrialContext { arm, normalizer })
    }

    pub fn extract(&self, trial: &ExerciseTrial, component: Component) -> Result<FeatureVector> {
        extract_features(trial, self.context(trial)?, component)
    }

    /// Features for every trial, in dataset order.
    pub fn extract_all(&self, dataset: &Dataset, component: Component) -> Result<Vec<FeatureVector>> {
        dataset.trials.par_iter().map(|t| self.extract(t, component)).collect()
    }
}

/// Per-feature min/max over a set of feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureRanges {
    pub fn from_features(features: &[FeatureVector]) -> Result<Self> {
        let first =
            features.first().ok_or_else(|| Error::Insufficient("feature ranges need at least one vector".into()))?;
        let dim = first.values.len();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for fv in features {
            if fv.values.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: fv.values.len() });
            }
            for (i, &v) in fv.values.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { min, max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, JointFrame, Side, SynthConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Arccos of the normalized dot product with compensated (two-sum)
    /// accumulation, an independent route to the same angle.
    fn acos_oracle(a: Point3, b: Point3, c: Point3) -> f64 {
        fn two_prod(x: f64, y: f64) -> (f64, f64) {
            let p = x * y;
            (p, x.mul_add(y, -p))
        }
        fn dd_sum(terms: &[(f64, f64)]) -> f64 {
            let (mut s, mut err) = (0.0f64, 0.0f64);
            for &(hi, lo) in terms {
                let t = s + hi;
                let bp = t - s;
                err += (s - (t - bp)) + (hi - bp) + lo;
                s = t;
            }
            s + err
        }
        let u = sub(a, b);
        let v = sub(c, b);
        let dot = dd_sum(&[two_prod(u[0], v[0]), two_prod(u[1], v[1]), two_prod(u[2], v[2])]);
        let nu = dd_sum(&[two_prod(u[0], u[0]), two_prod(u[1], u[1]), two_prod(u[2], u[2])]).sqrt();
        let nv = dd_sum(&[two_prod(v[0], v[0]), two_prod(v[1], v[1]), two_prod(v[2], v[2])]).sqrt();
        (dot / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn collinear_and_orthogonal() {
        assert_eq!(joint_angle([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]).unwrap(), 180.0);
        assert!((joint_angle([1.0, 0.0, 0.0], [0.0; 3], [0.0, 1.0, 0.0]).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ray_rejected() {
        assert!(matches!(joint_angle([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0; 3]), Err(Error::Geometry(_))));
    }

    #[test]
    fn angle_matches_acos_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut p = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        for _ in 0..100 {
            let (a, b, c) = (p(), p(), p());
            let got = joint_angle(a, b, c).unwrap();
            let want = acos_oracle(a, b, c);
            // acos loses precision at the endpoints; random triples stay well clear.
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    fn rotate(p: Point3, m: &[[f64; 3]; 3]) -> Point3 {
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    fn rotation(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
        let (cy, sy) = (yaw.cos(), yaw.sin());
        let (cp, sp) = (pitch.cos(), pitch.sin());
        let (cr, sr) = (roll.cos(), roll.sin());
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    fn point() -> impl Strategy<Value = Point3> {
        prop::array::uniform3(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn angle_symmetric_and_rigid_invariant(
            a in point(), b in point(), c in point(),
            yaw in -3.1f64..3.1, pitch in -1.5f64..1.5, roll in -3.1f64..3.1,
            t in point(),
        ) {
            prop_assume!(norm(sub(a, b)) > 1e-3 && norm(sub(c, b)) > 1e-3);
            let base = joint_angle(a, b, c).unwrap();
            prop_assert!((0.0..=180.0).contains(&base));
            prop_assert!((base - joint_angle(c, b, a).unwrap()).abs() < 1e-9);
            let m = rotation(yaw, pitch, roll);
            let tr = |p: Point3| { let r = rotate(p, &m); [r[0] + t[0], r[1] + t[1], r[2] + t[2]] };
            prop_assert!((base - joint_angle(tr(a), tr(b), tr(c)).unwrap()).abs() < 1e-6);
        }
    }

    fn trial_from(points: impl Fn(usize) -> [Point3; Joint::COUNT], n: usize) -> ExerciseTrial {
        ExerciseTrial {
            trial_id: "t".into(),
            subject_id: "s".into(),
            side: Side::Affected,
            trial_index: 1,
            frames: (0..n).map(|i| JointFrame { time_s: i as f64, positions: points(i) }).collect(),
        }
    }

    #[test]
    fn coincident_joints_zero_distance() {
        let t = trial_from(|i| [[i as f64, 1.0, 2.0]; Joint::COUNT], 5);
        let r = relative_distance_series(&t, Joint::Head, Joint::WristLeft, 1.0).unwrap();
        for ch in [&r.x, &r.y, &r.z, &r.euclidean] {
            assert!(ch.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_offset_distance() {
        let t = trial_from(
            |_| {
                let mut p = [[0.0; 3]; Joint::COUNT];
                p[Joint::Head.index()] = [1.0, 0.0, 0.0];
                p
            },
            4,
        );
        let r = relative_distance_series(&t, Joint::Head, Joint::Spine, 1.0).unwrap();
        assert!(r.euclidean.values.iter().all(|&v| v == 1.0));
        assert!(r.x.values.iter().all(|&v| v == 1.0));
        assert!(relative_distance_series(&t, Joint::Head, Joint::Spine, 0.0).is_err());
    }

    #[test]
    fn static_and_linear_displacement() {
        let t = trial_from(
            |i| {
                let mut p = [[0.5; 3]; Joint::COUNT];
                p[Joint::Spine.index()] = [0.1 * i as f64, 0.0, 0.0];
                p
            },
            5,
        );
        let head = displacement_series(&t, Joint::Head, 1.0).unwrap();
        assert!(head.iter().all(|ch| ch.values.iter().all(|&v| v == 0.0)));
        let spine = displacement_series(&t, Joint::Spine, 1.0).unwrap();
        let expected = [0.0, 0.1, 0.2, 0.30000000000000004, 0.4];
        for (got, want) in spine[0].values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn channels_match_recomputation() {
        let d = generate_synthetic(
            &SynthConfig { n_subjects: 1, trials_per_side: 1, frames_per_trial: 40, ..Default::default() },
            4,
        )
        .unwrap();
        let t = &d.trials[0];
        let norm_m = 0.27;
        let r = relative_distance_series(t, Joint::Head, Joint::WristRight, norm_m).unwrap();
        let disp = displacement_series(t, Joint::ShoulderLeft, norm_m).unwrap();
        let p0 = t.frames[0].get(Joint::ShoulderLeft);
        for (i, f) in t.frames.iter().enumerate() {
            let (h, w) = (f.get(Joint::Head), f.get(Joint::WristRight));
            let e = ((h[0] - w[0]).powi(2) + (h[1] - w[1]).powi(2) + (h[2] - w[2]).powi(2)).sqrt() / norm_m;
            assert!((r.euclidean.values[i] - e).abs() < 1e-12);
            assert!((r.y.values[i] - (h[1] - w[1]).abs() / norm_m).abs() < 1e-12);
            let s = f.get(Joint::ShoulderLeft);
            for axis in 0..3 {
                assert!((disp[axis].values[i] - (s[axis] - p0[axis]).abs() / norm_m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summary_hand_values() {
        let c = SeriesChannel { name: "c".into(), values: vec![2.5; 7] };
        assert_eq!(summarize_series(&c).unwrap(), Summary { min: 2.5, max: 2.5, mean: 2.5, range: 0.0 });
        let s = SeriesChannel { name: "s".into(), values: vec![0.0, 1.0, 2.0, 3.0] };
        assert_eq!(summarize_series(&s).unwrap(), Summary { min: 0.0, max: 3.0, mean: 1.5, range: 3.0 });
        assert!(summarize_series(&SeriesChannel { name: "e".into(), values: vec![] }).is_err());
    }

    proptest! {
        #[test]
        fn summary_matches_sort_oracle(values in prop::collection::vec(-1e3f64..1e3, 1..64)) {
            let s = summarize_series(&SeriesChannel { name: "r".into(), values: values.clone() }).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mean = values.iter().fold(0.0, |a, b| a + b) / values.len() as f64;
            prop_assert_eq!(s.min, sorted[0]);
            prop_assert_eq!(s.max, *sorted.last().unwrap());
            prop_assert_eq!(s.mean, mean);
            prop_assert_eq!(s.range, sorted.last().unwrap() - sorted[0]);
        }
    }

    #[test]
    fn schema_sizes_and_hash_stability() {
        let rom = FeatureSchema::for_component(Component::Rom);
        let comp = FeatureSchema::for_component(Component::Comp);
        assert_eq!(rom.len(), (3 + 2 + 2 * 3) * 4);
        assert_eq!(rom.len(), 44);
        assert_eq!(comp.len(), 36);
        assert_eq!(rom.channel_groups().len(), 11);
        assert_eq!(comp.channel_groups().len(), 9);
        assert_eq!(rom.schema_hash, FeatureSchema::build(Component::Rom).schema_hash);
        assert_ne!(rom.schema_hash, comp.schema_hash);
    }

    fn cohort(impairment: f64, compensation: f64) -> Dataset {
        let cfg = SynthConfig {
            n_subjects: 1,
            trials_per_side: 1,
            frames_per_trial: 60,
            noise_std_m: 0.0,
            impairment: Some(vec![impairment]),
            compensation: Some(vec![compensation]),
            ..Default::default()
        };
        generate_synthetic(&cfg, 21).unwrap()
    }

    fn affected_features(d: &Dataset, component: Component) -> FeatureVector {
        let ex = FeatureExtractor::new(d).unwrap();
        let t = d.trials.iter().find(|t| t.side == Side::Affected).unwrap();
        ex.extract(t, component).unwrap()
    }

    #[test]
    fn rom_feature_vector_shape_and_ordering() {
        let healthy = affected_features(&cohort(0.0, 0.0), Component::Rom);
        let impaired = affected_features(&cohort(1.0, 0.0), Component::Rom);
        assert_eq!(healthy.values.len(), 44);
        // At the trajectory peak the unimpaired wrist is nearer the head.
        let key = "rel_head_wrist.min";
        assert!(healthy.get(key).unwrap() < impaired.get(key).unwrap());
        assert_eq!(healthy, affected_features(&cohort(0.0, 0.0), Component::Rom));
    }

    #[test]
    fn comp_features_static_torso_and_ordering() {
        let still = affected_features(&cohort(0.3, 0.0), Component::Comp);
        assert_eq!(still.values.len(), 36);
        assert!(still.values.iter().all(|v| v.abs() < 1e-9), "{:?}", still.values);
        let leaning = affected_features(&cohort(0.3, 1.0), Component::Comp);
        assert!(leaning.get("disp_head_x.max").unwrap() > still.get("disp_head_x.max").unwrap());
        assert_eq!(still.schema_hash, leaning.schema_hash);
    }

    #[test]
    fn distance_features_translation_invariant() {
        let d = cohort(0.4, 0.5);
        let mut shifted = d.clone();
        for t in &mut shifted.trials {
            for f in &mut t.frames {
                for p in &mut f.positions {
                    p[0] += 3.0;
                    p[1] -= 1.0;
                    p[2] += 0.5;
                }
            }
        }
        for c in Component::ALL {
            let a = affected_features(&d, c);
            let b = affected_features(&shifted, c);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-9, "{c}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn extract_all_shares_schema() {
        let d = generate_synthetic(
            &SynthConfig { n_subjects: 2, trials_per_side: 2, frames_per_trial: 20, ..Default::default() },
            1,
        )
        .unwrap();
        let ex = FeatureExtractor::new(&d).unwrap();
        for c in Component::ALL {
            let fs = ex.extract_all(&d, c).unwrap();
            assert_eq!(fs.len(), d.trials.len());
            assert!(fs.iter().all(|f| f.schema_hash == FeatureSchema::for_component(c).schema_hash));
        }
    }

    #[test]
    fn ranges_cover_inputs() {
        let mk = |v: Vec<f64>| FeatureVector {
            trial_id: "x".into(),
            component: Component::Rom,
            schema_hash: String::new(),
            values: v,
        };
        let r = FeatureRanges::from_features(&[mk(vec![1.0, 5.0]), mk(vec![3.0, -1.0])]).unwrap();
        assert_eq!(r.min, vec![1.0, -1.0]);
        assert_eq!(r.max, vec![3.0, 5.0]);
        assert!(FeatureRanges::from_features(&[]).is_err());
    }
}
