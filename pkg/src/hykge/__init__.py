"""Knowledge-graph embeddings built from translations, 2D rotations and
quaternion rotations in Euclidean and Poincaré-ball space."""

from .errors import ConsistencyError, HykgeError, InputError
from .models import ALL_CONFIGURATIONS, KINDS, ModelState, init_model, param_count, score

__version__ = "0.1.0"

__all__ = [
    "ALL_CONFIGURATIONS",
    "ConsistencyError",
    "HykgeError",
    "InputError",
    "KINDS",
    "ModelState",
    "init_model",
    "param_count",
    "score",
]
