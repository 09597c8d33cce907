"""GMI-optimal quantization and fixed-budget compression of BICM LLRs."""

__version__ = "0.1.0"

from .constellation import build_qam, llr_piecewise, min_distance_llr
from .design import allocate_bits, bgmi, build_design_table, optimize_step, total_gmi
from .errors import LlrQuantError
from .llr_stats import ChannelModel, pmf_awgn, pmf_fading
from .quantizer import PerBitQuantizer, quantize

__all__ = [
    "ChannelModel",
    "LlrQuantError",
    "PerBitQuantizer",
    "allocate_bits",
    "bgmi",
    "build_design_table",
    "build_qam",
    "llr_piecewise",
    "min_distance_llr",
    "optimize_step",
    "pmf_awgn",
    "pmf_fading",
    "quantize",
    "total_gmi",
]
