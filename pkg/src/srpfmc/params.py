"""The parameter tuple every estimator is conditioned on."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .field import CutoffSpec
from .potentials import PotentialSpec


@dataclass(frozen=True)
class ModelParams:
    d: int = 3
    m: float = 1.0
    alpha: float = 0.0
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)

    def __post_init__(self):
        problems = []
        if not isinstance(self.d, int) or self.d < 1:
            problems.append(("model.d", "must be a positive integer"))
        if not self.m >= 0:
            problems.append(("model.m", "must be nonnegative"))
        if self.alpha != self.alpha:
            problems.append(("model.alpha", "must be a real number"))
        if problems:
            raise ConfigError(problems)

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)
