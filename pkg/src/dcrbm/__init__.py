"""Temporal energy-based models for dyadic motion sequences.

RBM / DRBM / CRBM / DCRBM parameterizations, contrastive-divergence
training, exact label posteriors, sequence generation, and a synthetic
dyadic-motion benchmark.
"""

__version__ = "0.1.0"

from .models import (
    CrbmParams,
    DcrbmParams,
    DrbmParams,
    HistoryWindow,
    LabelDist,
    ModelDims,
    RbmParams,
    dcrbm_posterior,
    init_params,
    sigmoid,
)
from .training import TrainConfig, TrainReport, cd_step, train
from .generation import GeneratedSequence, GenerationRequest, generate_full, generate_partial
from .data import DyadSequence, SynthConfig, kfold_split, normalize, synthesize, window
from .evaluate import Metrics, classify_dataset, gen_error_curve, generation_error
from .checkpoint import load_checkpoint, save_checkpoint
