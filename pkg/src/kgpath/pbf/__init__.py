from .combine import LAMBDA_GRID, combine_scores, masked_softmax, mix_probabilities
from .features import QueryFeatures, build_features, query_features, sample_negatives
from .io import load_relation_model, load_relation_models, save_relation_model
from .softmax import RelationModel, SoftmaxConfig, batch_loss_grad, train_relation_model

__all__ = ["LAMBDA_GRID", "combine_scores", "masked_softmax", "mix_probabilities", "QueryFeatures",
           "build_features", "query_features", "sample_negatives", "RelationModel", "SoftmaxConfig",
           "batch_loss_grad", "train_relation_model", "save_relation_model", "load_relation_model",
           "load_relation_models"]
