"""LZ78-transformed sequential probability assignments.

Compression, classification, filtering and generation built on one
LZ78 prefix tree with an inner SPA at every node.
"""

from .core import AlphabetError, LogLossReport, TokenSequence, log_loss
from .spa import SPA, DirichletFamily, DirichletSPA, UniformSPA
from .tree import LZ78Tree, ModelFormatError
from .transform import FrozenModelError, LZTransformSPA, per_node_log_loss
from .codec import EncodedStream, decode, encode
from .classification import ClassifierModel, classify, fit, sweep
from .filtering import Channel, FilterConfig, LossMatrix, run_filter
from .generation import GenConfig, generate
from .evaluation import SourceSpec, exact_kl_sourcelaw_vs_model, wasserstein_1d

__version__ = "0.1.0"

__all__ = [
    "AlphabetError", "LogLossReport", "TokenSequence", "log_loss",
    "SPA", "DirichletFamily", "DirichletSPA", "UniformSPA",
    "LZ78Tree", "ModelFormatError",
    "FrozenModelError", "LZTransformSPA", "per_node_log_loss",
    "EncodedStream", "decode", "encode",
    "ClassifierModel", "classify", "fit", "sweep",
    "Channel", "FilterConfig", "LossMatrix", "run_filter",
    "GenConfig", "generate",
    "SourceSpec", "exact_kl_sourcelaw_vs_model", "wasserstein_1d",
]
