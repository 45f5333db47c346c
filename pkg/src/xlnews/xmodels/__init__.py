"""Cross-lingual projection models."""
from .container import ModelFormatError, load_model, save_model
from .model import (KnnResult, LanguageMap, ProjectionModel, ProxyCache, build_proxy_cache,
                    knn_search, normalize_columns, pair_scores, project, project_collection,
                    similarity, topk_blocked)
from .train import (solve_hub_sscor, train_cca_model, train_hubcca_model, train_kmeans_model,
                    train_lsi_model)

__all__ = [
    "KnnResult", "LanguageMap", "ModelFormatError", "ProjectionModel", "ProxyCache",
    "build_proxy_cache", "knn_search", "load_model", "normalize_columns", "pair_scores",
    "project", "project_collection", "save_model", "similarity", "solve_hub_sscor",
    "topk_blocked", "train_cca_model", "train_hubcca_model", "train_kmeans_model",
    "train_lsi_model",
]
