from .channel import ChannelModel
from .geometry import NetworkGeometry
from .lsf import LsfDensity, lsf_cdf, lsf_pdf
from .montecarlo import ValidationReport, validate
from .sampling import RngStream, SampleBatch, SamplingStrategy

__all__ = [
    "ChannelModel",
    "LsfDensity",
    "NetworkGeometry",
    "RngStream",
    "SampleBatch",
    "SamplingStrategy",
    "ValidationReport",
    "lsf_cdf",
    "lsf_pdf",
    "validate",
]
