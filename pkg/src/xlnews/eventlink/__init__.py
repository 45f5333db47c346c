"""Online clustering, cross-lingual cluster linking and its evaluation."""
from .cluster import (Article, Assignment, Cluster, ClusterStreamState, expire_clusters,
                      flush_clusters, online_cluster_step, snapshot_clusters)
from .io import (read_clusters, read_labelled_pairs, load_linker, save_linker, write_clusters,
                 write_labelled_pairs)
from .links import (FEATURE_GROUPS, FEATURE_NAMES, LinkFeatureVector, candidate_clusters,
                    extract_features, jaccard, weighted_cosine)
from .svm import (CVResult, LinearModel, kfold_cv, predict_link, predict_links,
                  primal_objective, stratified_folds, train_linker)

__all__ = [
    "Article", "Assignment", "CVResult", "Cluster", "ClusterStreamState", "FEATURE_GROUPS",
    "FEATURE_NAMES", "LinearModel", "LinkFeatureVector", "candidate_clusters", "expire_clusters",
    "extract_features", "flush_clusters", "jaccard", "kfold_cv", "load_linker",
    "online_cluster_step", "predict_link", "predict_links", "primal_objective",
    "read_clusters", "read_labelled_pairs", "save_linker", "snapshot_clusters",
    "stratified_folds", "train_linker", "weighted_cosine", "write_clusters",
    "write_labelled_pairs",
]
