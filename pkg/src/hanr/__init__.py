"""hanr: low-latency subband speech enhancement with a learned gain
predictor, a minimum-tracking spectral-subtraction baseline, and the
objective evaluation (STOI, noise reduction, speech distortion) around
them."""

__version__ = "0.1.0"

from .config import PipelineConfig, PROFILES
from .errors import ConfigError, DataError, HanrError, NumericError
from .filterbank import AnalysisFilterBank, FilterbankConfig, SynthesisFilterBank
from .network import NetworkTopology, TrainConfig, load_model, save_model, train
from .pipeline import enhance_stream, evaluate_systems

__all__ = [
    "PROFILES", "PipelineConfig",
    "HanrError", "ConfigError", "DataError", "NumericError",
    "AnalysisFilterBank", "FilterbankConfig", "SynthesisFilterBank",
    "NetworkTopology", "TrainConfig", "load_model", "save_model", "train",
    "enhance_stream", "evaluate_systems",
    "__version__",
]
