//! Example-based and feature-based explanations of trained assessment models.

mod benchmark;
mod knn;
mod payload;
mod pca;
mod radar;
mod shapley;
mod space;
mod tsne;

pub use benchmark::{benchmark_info, BenchmarkInfo};
pub use knn::{
    knn_classifier_sweep, nearest, vote, Membership, Metric, Neighbor, NeighborSets, SweepCell, DEFAULT_K, SWEEP_KS,
};
pub use payload::{
    check_partition, explain_case, ComponentInputs, ComponentNeighbors, DecisionSupport, ExampleExplanation,
    ExplainOptions, ExplanationPayload, GlobalPoint, NeighborEntry,
};
pub use pca::{project_pca, PcaProjection};
pub use radar::{normalize, radar_payload, RadarAxis};
pub use shapley::{
    channel_groups, per_feature_groups, shapley_attribution, shapley_values, top_k_features, AttributionMode,
    FeatureAttribution, FeatureGroup, ShapleyValues, MAX_EXACT_PLAYERS,
};
pub use space::{
    build_embedding_space, common_unique_neighbors, EmbeddingSpace, NeighborHit, NeighborQuery, NeighborResult,
    Projection, ProjectionMethod, QueryTarget, Representation, SpaceKind,
};
pub use tsne::{project_neighbor_embedding, NeighborEmbedding, NeighborEmbeddingParams, MIN_SAMPLES};
