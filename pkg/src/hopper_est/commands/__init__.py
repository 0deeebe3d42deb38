"""hopper-est subcommands.

Each module registers one command on ``hopper_est.cli.app``:
- simulate: closed-loop trials written as hop logs, with metrics.
- train: genetic-algorithm training of estimator parameters.
- evaluate: replay of recorded logs against the estimator and baselines.
- sweep: estimation error versus sensing frequency.
- agility: agility metrics for a table of platforms.
- subset: stratified hop subsets of a dataset.
- sensitivity: cost sensitivity around a trained parameter set.
"""

from . import (  # noqa: F401
    agility,
    evaluate,
    sensitivity,
    simulate,
    subset,
    sweep,
    train,
)

__all__: list[str] = [
    "agility",
    "evaluate",
    "sensitivity",
    "simulate",
    "subset",
    "sweep",
    "train",
]
