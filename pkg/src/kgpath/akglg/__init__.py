from .groups import CIRCLE, LINE, SIGN, GroupInstance, get_group
from .io import file_digest, load_model, save_model
from .model import (AkglgModel, EquivalenceReport, compose_complex, decompose, decompose_complex,
                    score_equivalence_check)
from .train import TrainConfig, TrainingDiverged, loss_and_grad, train

__all__ = ["CIRCLE", "LINE", "SIGN", "GroupInstance", "get_group", "AkglgModel", "EquivalenceReport",
           "compose_complex", "decompose", "decompose_complex", "score_equivalence_check",
           "TrainConfig", "TrainingDiverged", "loss_and_grad", "train", "save_model", "load_model",
           "file_digest"]
