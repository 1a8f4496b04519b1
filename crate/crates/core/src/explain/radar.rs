use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{FeatureRanges, FeatureVector};

/// One spoke of the affected-versus-unaffected radar chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarAxis {
    /// Name as it was ranked (a feature or a channel group).
    pub name: String,
    /// Schema feature that supplies the plotted value.
    pub feature: String,
    pub affected: f64,
    pub unaffected: f64,
    pub affected_raw: f64,
    pub unaffected_raw: f64,
    /// The feature has no spread in the reference ranges; both sides read 0.5.
    pub zero_range: bool,
}

/// `value` min-max scaled into [0, 1] and clipped. `None` for a zero range.
pub fn normalize(value: f64, min: f64, max: f64) -> Option<f64> {
    let span = max - min;
    if span.is_nan() || span <= 0.0 {
        return None;
    }
    Some(((value - min) / span).clamp(0.0, 1.0))
}

/// A channel group name stands for that channel's mean.
fn resolve(fv: &FeatureVector, name: &str) -> Result<(usize, String)> {
    let schema = fv.schema();
    if let Some(i) = schema.index_of(name) {
        return Ok((i, name.to_string()));
    }
    let mean = format!("{name}.mean");
    schema
        .index_of(&mean)
        .map(|i| (i, mean))
        .ok_or_else(|| Error::NotFound(format!("feature `{name}` in the {} schema", fv.component)))
}

pub fn radar_payload<S: AsRef<str>>(
    names: &[S],
    affected: &FeatureVector,
    unaffected: &FeatureVector,
    ranges: &FeatureRanges,
) -> Result<Vec<RadarAxis>> {
    if affected.schema_hash != unaffected.schema_hash {
        return Err(Error::validation("affected and unaffected trials use different feature schemas"));
    }
    let dim = affected.values.len();
    if ranges.min.len() != dim || ranges.max.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: ranges.min.len() });
    }
    names
        .iter()
        .map(|name| {
            let (i, feature) = resolve(affected, name.as_ref())?;
            let (a, u) = (affected.values[i], unaffected.values[i]);
            let (lo, hi) = (ranges.min[i], ranges.max[i]);
            let axis = match (normalize(a, lo, hi), normalize(u, lo, hi)) {
                (Some(na), Some(nu)) => (na, nu, false),
                _ => (0.5, 0.5, true),
            };
            Ok(RadarAxis {
                name: name.as_ref().to_string(),
                feature,
                affected: axis.0,
                unaffected: axis.1,
                affected_raw: a,
                unaffected_raw: u,
                zero_range: axis.2,
            })
        })
        .collect()
}
