"""causalgen: causal generation and adapted-distance evaluation of financial paths.

The package trains a time-causal variational autoencoder with a
learnable flow prior on path data, generates and extends synthetic
paths, and scores real-versus-generated path laws under both classical
weak metrics and adapted (causality-respecting) optimal transport.
Downstream stochastic-optimization problems close the loop: values
computed on generated paths come with robustness guarantees in the
causal distances.

Submodules group the moving parts: ``simulate`` (reference market
models), ``paths`` (path containers and normalization), ``vae`` and
``flows`` (the generator), ``metrics`` (distances and stylized facts),
``stochopt`` (optimization problems and robustness checks),
``checkpoint``/``config`` (persistence), ``cli`` and ``service``
(command line and HTTP front ends).  The names below cover the common
workflow; everything else stays importable from its submodule.
"""

from causalgen.checkpoint import load_checkpoint, save_checkpoint
from causalgen.paths import PathSet, denormalize, normalize_to_ball
from causalgen.simulate import (
    BSParams,
    HestonParams,
    PDV4Params,
    derived_rng,
    simulate_bs,
    simulate_heston,
    simulate_pdv4,
)
from causalgen.vae import (
    ConditionalTCVAE,
    ConditionSpec,
    TCVAE,
    TrainConfig,
    extend_path,
    generate,
    generate_conditional,
    make_conditional_dataset,
    train,
    train_conditional,
)

__version__ = "0.1.0"

__all__ = [
    "BSParams",
    "ConditionSpec",
    "ConditionalTCVAE",
    "HestonParams",
    "PDV4Params",
    "PathSet",
    "TCVAE",
    "TrainConfig",
    "denormalize",
    "derived_rng",
    "extend_path",
    "generate",
    "generate_conditional",
    "load_checkpoint",
    "make_conditional_dataset",
    "normalize_to_ball",
    "save_checkpoint",
    "simulate_bs",
    "simulate_heston",
    "simulate_pdv4",
    "train",
    "train_conditional",
    "__version__",
]
