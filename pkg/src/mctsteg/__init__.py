"""Tree-search driven non-additive steganographic embedding.

The package embeds payloads by letting a Monte Carlo tree search choose,
per image region, which modification direction to make cheaper, guided by
feedback from a steganalytic environment model. Costs, the optimal
embedding simulator, the search, the detector, and the metrics are all
importable on their own.
"""

from .types import (
    WET_COST,
    CostPair,
    Domain,
    ModificationMap,
    PixelMatrix,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DimensionError,
    DomainError,
    FormatError,
    PayloadError,
    ProtocolError,
    StegError,
)
from .cost import distortion, hill_cost
from .lattice import SchemeKind, SublatticeScheme, ddo_order, decompose
from .mcts import Budget, PolarityMatrix
from .pipeline import (
    CostSource,
    EmbedPlan,
    StegoResult,
    Termination,
    cmd_embed,
    embed,
    plain_embed,
)
from .simulator import (
    EmbedProbabilities,
    apply,
    change_rate,
    fit_probabilities,
    sample,
)
from .environment import (
    ConstantEnvironment,
    EnvScore,
    LinearModel,
    TrainConfig,
    extract_features,
    load_model,
    save_model,
    train,
)
from .remote import RemoteEnvironment
from .metrics import fcc, p_e

__version__ = "0.1.0"

__all__ = [
    "WET_COST",
    "CostPair",
    "Domain",
    "ModificationMap",
    "PixelMatrix",
    "StegError",
    "FormatError",
    "DomainError",
    "DimensionError",
    "PayloadError",
    "ConvergenceError",
    "ProtocolError",
    "DataError",
    "ConfigError",
    "hill_cost",
    "distortion",
    "SchemeKind",
    "SublatticeScheme",
    "decompose",
    "ddo_order",
    "Budget",
    "PolarityMatrix",
    "EmbedPlan",
    "StegoResult",
    "CostSource",
    "Termination",
    "embed",
    "plain_embed",
    "cmd_embed",
    "EmbedProbabilities",
    "fit_probabilities",
    "sample",
    "apply",
    "change_rate",
    "EnvScore",
    "LinearModel",
    "ConstantEnvironment",
    "TrainConfig",
    "train",
    "extract_features",
    "save_model",
    "load_model",
    "RemoteEnvironment",
    "fcc",
    "p_e",
    "__version__",
]
