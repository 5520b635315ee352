from .regression import CoqeRegressor, TransformerRegressor
from .lsa import RestrictedLsa, duality_gap, linear_attention, lsa_task_vector
from .classification import (
    ClassVectorTable,
    CoqeClassifier,
    TransformerClassifier,
    noise_schedule,
)
from .arithmetic import ArithmeticLM, VOCAB

__all__ = [
    "ArithmeticLM",
    "ClassVectorTable",
    "CoqeClassifier",
    "CoqeRegressor",
    "RestrictedLsa",
    "TransformerClassifier",
    "TransformerRegressor",
    "VOCAB",
    "duality_gap",
    "linear_attention",
    "lsa_task_vector",
    "noise_schedule",
]
