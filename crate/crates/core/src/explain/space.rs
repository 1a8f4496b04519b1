use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::knn::{knn_classifier_sweep, nearest, Metric, NeighborSets, SweepCell, DEFAULT_K, SWEEP_KS};
use super::pca::{project_pca, PcaProjection};
use super::tsne::{project_neighbor_embedding, NeighborEmbeddingParams};
use crate::dataset::{Component, Label};
use crate::error::{Error, Result};
use crate::model::{LabeledSet, TrainedModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Pca,
    #[default]
    NeighborEmbedding,
}

impl FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(ProjectionMethod::Pca),
            "neighbor_embedding" | "tsne" | "umap" => Ok(ProjectionMethod::NeighborEmbedding),
            _ => Err(Error::Config(format!("unknown projection method `{s}`"))),
        }
    }
}

/// Which representation feeds the embedding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Post-ReLU activations of the first hidden layer.
    #[default]
    FirstHidden,
    /// Standardized model inputs.
    Input,
}

/// Where neighbor distances are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    #[default]
    #[serde(rename = "projected_2d")]
    Projected2d,
    Activation,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Projected2d => "projected_2d",
            SpaceKind::Activation => "activation",
        })
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projected_2d" | "projected" => Ok(SpaceKind::Projected2d),
            "activation" => Ok(SpaceKind::Activation),
            _ => Err(Error::Config(format!("unknown space `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Projection {
    Pca(PcaProjection),
    NeighborEmbedding { params: NeighborEmbeddingParams, perplexity_used: f64, kl_divergence: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub component: Component,
    pub model_id: String,
    pub representation: Representation,
    pub sample_ids: Vec<String>,
    pub activations: Vec<Vec<f64>>,
    pub coords: Vec<[f64; 2]>,
    pub projection: Projection,
}

/// Embeds every sample of `set` through `model` and projects to 2D.
pub fn build_embedding_space(
    model: &TrainedModel,
    model_id: &str,
    set: &LabeledSet,
    method: ProjectionMethod,
    representation: Representation,
    params: &NeighborEmbeddingParams,
) -> Result<EmbeddingSpace> {
    if !model.is_trained() {
        return Err(Error::validation("embedding space requires a trained model"));
    }
    if model.config.component != set.component {
        return Err(Error::validation(format!(
            "model is for {}, samples are {}",
            model.config.component, set.component
        )));
    }
    if set.len() < 3 {
        return Err(Error::Insufficient(format!("embedding space needs at least 3 samples, got {}", set.len())));
    }
    let activations = set
        .features
        .iter()
        .map(|f| match representation {
            Representation::FirstHidden => model.embed(&f.values),
            Representation::Input => Ok(model.prepare(&f.values)),
        })
        .collect::<Result<Vec<_>>>()?;

    let (coords, projection) = match method {
        ProjectionMethod::Pca => {
            let pca = project_pca(&activations)?;
            (pca.coords.clone(), Projection::Pca(pca))
        }
        ProjectionMethod::NeighborEmbedding => {
            let ne = project_neighbor_embedding(&activations, params)?;
            (
                ne.coords,
                Projection::NeighborEmbedding {
                    params: params.clone(),
                    perplexity_used: ne.perplexity_used,
                    kl_divergence: ne.kl_divergence,
                },
            )
        }
    };

    Ok(EmbeddingSpace {
        component: set.component,
        model_id: model_id.to_string(),
        representation,
        sample_ids: set.trial_ids.clone(),
        activations,
        coords,
        projection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryTarget {
    Trial(String),
    Features(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborQuery {
    pub target: QueryTarget,
    pub k: usize,
    pub metric: Metric,
    pub space: SpaceKind,
    pub exclude_self: bool,
}

impl NeighborQuery {
    /// k = 5, Euclidean, projected space, query excluded from its own neighbors.
    pub fn trial(id: impl Into<String>) -> Self {
        Self {
            target: QueryTarget::Trial(id.into()),
            k: DEFAULT_K,
            metric: Metric::default(),
            space: SpaceKind::default(),
            exclude_self: true,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_space(mut self, space: SpaceKind) -> Self {
        self.space = space;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborHit {
    pub id: String,
    pub distance: f64,
    pub coords: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborResult {
    pub component: Component,
    pub query: String,
    pub k: usize,
    pub metric: Metric,
    pub space: SpaceKind,
    pub neighbors: Vec<NeighborHit>,
}

impl NeighborResult {
    pub fn ids(&self) -> Vec<String> {
        self.neighbors.iter().map(|n| n.id.clone()).collect()
    }
}

impl EmbeddingSpace {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.sample_ids.iter().position(|s| s == id)
    }

    fn projected_points(&self) -> Vec<Vec<f64>> {
        self.coords.iter().map(|c| c.to_vec()).collect()
    }

    /// Places an arbitrary representation vector in this space's coordinates.
    fn locate(&self, model: &TrainedModel, features: &[f64], space: SpaceKind) -> Result<Vec<f64>> {
        let rep = match self.representation {
            Representation::FirstHidden => model.embed(features)?,
            Representation::Input => {
                if features.len() != model.input_dim {
                    return Err(Error::DimensionMismatch { expected: model.input_dim, actual: features.len() });
                }
                model.prepare(features)
            }
        };
        match space {
            SpaceKind::Activation => Ok(rep),
            SpaceKind::Projected2d => match &self.projection {
                Projection::Pca(p) => Ok(p.project(&rep)?.to_vec()),
                Projection::NeighborEmbedding { .. } => Err(Error::Config(
                    "a neighbor-embedding projection cannot place new points; query by trial id or use the activation space".into(),
                )),
            },
        }
    }

    pub fn knn(&self, model: &TrainedModel, query: &NeighborQuery) -> Result<NeighborResult> {
        let (query_vec, self_index, label) = match &query.target {
            QueryTarget::Trial(id) => {
                let i =
                    self.index_of(id).ok_or_else(|| Error::NotFound(format!("sample `{id}` in embedding space")))?;
                let v = match query.space {
                    SpaceKind::Activation => self.activations[i].clone(),
                    SpaceKind::Projected2d => self.coords[i].to_vec(),
                };
                (v, Some(i), id.clone())
            }
            QueryTarget::Features(x) => (self.locate(model, x, query.space)?, None, "<features>".to_string()),
        };
        let exclude = if query.exclude_self { self_index } else { None };
        let found = match query.space {
            SpaceKind::Activation => {
                nearest(&self.activations, &self.sample_ids, &query_vec, query.k, query.metric, exclude)?
            }
            SpaceKind::Projected2d => {
                nearest(&self.projected_points(), &self.sample_ids, &query_vec, query.k, query.metric, exclude)?
            }
        };
        Ok(NeighborResult {
            component: self.component,
            query: label,
            k: query.k,
            metric: query.metric,
            space: query.space,
            neighbors: found
                .into_iter()
                .map(|n| NeighborHit { coords: self.coords[n.index], id: n.id, distance: n.distance })
                .collect(),
        })
    }

    /// Leave-one-out k-NN accuracy over k ∈ {5, …, 30} × {euclidean, cosine}.
    pub fn classifier_sweep(&self, labels: &[Label], space: SpaceKind) -> Result<Vec<SweepCell>> {
        match space {
            SpaceKind::Activation => {
                knn_classifier_sweep(&self.activations, &self.sample_ids, labels, &SWEEP_KS, &Metric::ALL)
            }
            SpaceKind::Projected2d => {
                knn_classifier_sweep(&self.projected_points(), &self.sample_ids, labels, &SWEEP_KS, &Metric::ALL)
            }
        }
    }
}

/// Splits two components' neighbor lists for the same query into shared and
/// component-specific sets.
pub fn common_unique_neighbors(rom: &NeighborResult, comp: &NeighborResult) -> Result<NeighborSets> {
    if rom.query != comp.query {
        return Err(Error::validation(format!(
            "neighbor results are for different queries (`{}` vs `{}`)",
            rom.query, comp.query
        )));
    }
    Ok(NeighborSets::partition(&rom.ids(), &comp.ids()))
}
