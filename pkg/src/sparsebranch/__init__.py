"""Branch and bound with sparse learned strong-branching approximations."""

from .bnb import SolverConfig, SolveResult, solve_mip
from .branching import make_rule
from .generators import generate
from .learn import PathConfig, SparseModel, load_model, train
from .model import MipInstance, build_instance, load_instance, save_instance

__all__ = ["SolverConfig", "SolveResult", "solve_mip", "make_rule", "generate", "PathConfig",
           "SparseModel", "load_model", "train", "MipInstance", "build_instance", "load_instance",
           "save_instance"]
