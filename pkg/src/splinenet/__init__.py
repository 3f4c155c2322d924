"""MARS, Faber-Schauder and sparse ReLU networks, with exact compilation between them."""
__version__ = "0.1.0"

from .exceptions import ModelError, ParameterError, ParseError, ShapeError, SplinenetError, TrainingError
from .relu_net import Architecture, ReluNetwork, parallel_join, validate_class
from .data import Dataset
from .mars import MarsBasis, MarsModel, backward_deletion, forward_selection
from .faber_schauder import FsIndex, FsModel, fit_kaczmarz, fit_least_squares, fs_to_mars
from .compiler import CompileCertificate, build_mult, compile_basis, compile_fs, compile_mars, verify_certificate
from .training import TrainConfig, loss_and_gradient, train
from .bench import ExperimentSpec, generate, prediction_risk, run_experiment
