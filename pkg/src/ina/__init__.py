"""Information-weighted classifier.

Weights are quantities of information (bits) computed in closed form from a
feature x class frequency matrix, optionally refined by an F-measure driven
correction loop. Prediction is the argmax of summed information.
"""
from .corpus import (Binarizer, Dataset, FrequencyMatrix, LabeledExample, Vocabulary,
                     binarize, feature_group_stats, find_conflicts, ingest)
from .errors import (ChecksumError, DomainError, INAError, ModelFileError,
                     TruncatedModelError, ValidationError, VersionMismatchError)
from .info_math import EmergenceConfig
from .model import InfoModel, Prediction, predict, score
from .modelfile import load, save
from .training import EvalReport, TrainConfig, e_step, evaluate, f_beta, fit, m_step

__version__ = "0.1.0"

__all__ = [
    "Binarizer", "ChecksumError", "Dataset", "DomainError", "EmergenceConfig", "EvalReport",
    "FrequencyMatrix", "INAError", "InfoModel", "LabeledExample", "ModelFileError",
    "Prediction", "TrainConfig", "TruncatedModelError", "ValidationError",
    "VersionMismatchError", "Vocabulary", "binarize", "e_step", "evaluate", "f_beta",
    "feature_group_stats", "find_conflicts", "fit", "ingest", "load", "m_step", "predict",
    "save", "score",
]
