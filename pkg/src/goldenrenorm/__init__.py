"""Renormalization of golden-mean semi-Siegel Henon maps."""

from .config import Config
from .errors import ConfigError, DomainEscape, MissingArtifact, RenormError
from .goldenrot import THETA, Word, fibonacci_q, partition, word_array
from .renorm1d import C_STAR, MU_STAR, Pair1D, newton_fixed_point, quad_pair, renormalize1d
from .renorm2d import HenonMap, Pair2D, embed_1d, henon_pair, renormalize2d
from .series import Series1, Series2

__all__ = [
    "Config", "ConfigError", "DomainEscape", "MissingArtifact", "RenormError",
    "THETA", "Word", "fibonacci_q", "partition", "word_array",
    "C_STAR", "MU_STAR", "Pair1D", "newton_fixed_point", "quad_pair", "renormalize1d",
    "HenonMap", "Pair2D", "embed_1d", "henon_pair", "renormalize2d",
    "Series1", "Series2",
]
