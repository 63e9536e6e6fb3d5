//! Post-solver stages: outlier detection, affinity and spectral clustering,
//! and the evaluation metrics.

mod cluster;
mod hungarian;
mod metrics;
mod outliers;
mod subspace;

pub use cluster::{build_affinity, kmeans, spectral_cluster, KMeansFit, KMEANS_RESTARTS};
pub use hungarian::max_weight_assignment;
pub use metrics::{
    eval_clustering, eval_outlier_auc, score_detected_clustering, support_distance,
    ClusteringScores,
};
pub use outliers::{detect_outliers, outlier_scores, OutlierPartition};
pub use subspace::{ambiguity_norm, incoherence_mu, projector_distance, rowspace_error};
