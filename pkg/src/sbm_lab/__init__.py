"""Community recovery and detection experiments for sparse block models."""

from .model import (GraphSample, ModelParams, Regime, RegimeKind, alignment,
                    alignment_weight, classify_regime, invert_params, sample_er,
                    sample_sbm, sample_tilde_sbm)

__all__ = [
    "GraphSample", "ModelParams", "Regime", "RegimeKind", "alignment",
    "alignment_weight", "classify_regime", "invert_params", "sample_er",
    "sample_sbm", "sample_tilde_sbm",
]
__version__ = "0.1.0"
