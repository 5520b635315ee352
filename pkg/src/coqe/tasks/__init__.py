from .regression import (
    FUNCTION_KINDS,
    OOD_SHIFTS,
    apply_ood_shift,
    combination_features,
    default_dim,
    make_prompt,
    sample_tasks,
    task_labels,
)
from .classification import (
    N_CONTEXT,
    VectorClassDataset,
    build_class_episodes,
    build_probe_episodes,
    make_vector_classes,
    zipf_probs,
    zipf_sample,
)
from .arithmetic import gen_arithmetic
from .dump import episode_records, write_records

__all__ = [
    "FUNCTION_KINDS",
    "N_CONTEXT",
    "OOD_SHIFTS",
    "VectorClassDataset",
    "apply_ood_shift",
    "build_class_episodes",
    "build_probe_episodes",
    "combination_features",
    "default_dim",
    "episode_records",
    "gen_arithmetic",
    "make_prompt",
    "make_vector_classes",
    "sample_tasks",
    "task_labels",
    "write_records",
    "zipf_probs",
    "zipf_sample",
]
