"""Find the most unusual part of a grayscale image for a given shape."""

from .core import Shape, as_image, block_distance, cut_block, origin_grid, origins_disjoint
from .imageio import read_image, sample_image
from .network import NetworkParams, run_network
from .oracle import distance_outliers, nn_distance_map, rarest_block
from .projection import (
    ScoringParams,
    project_all,
    projection_histogram,
    sample_operator,
    score_image,
    smoothed_penalty,
    top_candidates,
)
from .synth import generate

__version__ = "0.1.0"
