"""Behavioral modeling and predistortion of power amplifiers with long-term memory."""

from .basis import BasisKind, BasisMatrix, BasisSpec, build_matrix, parameter_count
from .errors import (FitError, FormatError, LtpaError, ModelConsistencyError, NumericalError,
                     UnsupportedError)
from .ident import FitConfig, FitReport, fit, gn_step, solve_theta
from .ltmodel import LtModel, flop_cost, load_model, predict, save_model
from .signal import (BurstProfile, IqSignal, generate_bursty, generate_two_tone, read_iq,
                     write_iq)
from .state import FilterKind, StateFilter, compute_state, effective_memory, frequency_response

__version__ = "0.1.0"

__all__ = [
    "BasisKind", "BasisMatrix", "BasisSpec", "build_matrix", "parameter_count",
    "FitError", "FormatError", "LtpaError", "ModelConsistencyError", "NumericalError",
    "UnsupportedError",
    "FitConfig", "FitReport", "fit", "gn_step", "solve_theta",
    "LtModel", "flop_cost", "load_model", "predict", "save_model",
    "BurstProfile", "IqSignal", "generate_bursty", "generate_two_tone", "read_iq", "write_iq",
    "FilterKind", "StateFilter", "compute_state", "effective_memory", "frequency_response",
]
