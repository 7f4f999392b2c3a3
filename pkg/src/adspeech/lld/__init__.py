"""Frame-level low-level descriptors (LLDs) and their functionals."""

from .extract import FEATURE_SETS, IS09_BASE, IS10_BASE, LLDMatrix, extract_lld, row_names
from .framing import FrameConfig, frame_signal, pitch_frames
from .functionals import FUNCTIONAL_NAMES, FunctionalVector, apply_functionals, delta, functionals_matrix
from .lsp import lsp_frequencies
from .pitch import f0_and_voicing
from .spectral import mfcc
from .voice_quality import jitter_shimmer

__all__ = [
    "FEATURE_SETS",
    "FUNCTIONAL_NAMES",
    "FrameConfig",
    "FunctionalVector",
    "IS09_BASE",
    "IS10_BASE",
    "LLDMatrix",
    "apply_functionals",
    "delta",
    "extract_lld",
    "f0_and_voicing",
    "frame_signal",
    "functionals_matrix",
    "jitter_shimmer",
    "lsp_frequencies",
    "mfcc",
    "pitch_frames",
    "row_names",
]
