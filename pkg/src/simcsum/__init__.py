"""Joint text simplification and cross-lingual summarization on a numpy autodiff core."""

from .kernels import NUMBA_ENABLED
from .model import ModelConfig, ModelParams, TaskId, init_params
from .text_data import Vocab, build_vocab
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["NUMBA_ENABLED", "ModelConfig", "ModelParams", "TaskId", "TrainConfig", "Vocab", "build_vocab",
           "init_params", "train", "__version__"]
