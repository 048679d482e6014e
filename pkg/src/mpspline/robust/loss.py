"""Loss functions for M-estimation: rho, its derivative psi and the IRLS weight psi(x)/x."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["RobustLoss", "square", "huber", "bisquare", "make_loss", "loss_eval", "DEFAULT_TUNING"]

DEFAULT_TUNING = {"square": 1.0, "huber": 1.345, "bisquare": 4.685}
_FAMILIES = tuple(DEFAULT_TUNING)
# below this |x| the weight takes its limiting value psi'(0) = 1
_ZERO = 1e-10


@dataclass(frozen=True)
class RobustLoss:
    """A symmetric loss ``rho`` with tuning constant ``tuning`` (in scale units).

    The square loss is normalised as x**2 / 2 so that its weight is identically
    one; its tuning constant is ignored.
    """

    family: str
    tuning: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}; expected one of {_FAMILIES}")
        c = float(self.tuning)
        if not (c > 0 and math.isfinite(c)):
            raise ValueError(f"tuning constant must be positive and finite, got {self.tuning!r}")
        object.__setattr__(self, "tuning", c)

    @property
    def convex(self) -> bool:
        return self.family != "bisquare"

    def rho(self, x):
        x = np.asarray(x, dtype=np.float64)
        c = self.tuning
        if self.family == "square":
            return 0.5 * x * x
        ax = np.abs(x)
        if self.family == "huber":
            return np.where(ax <= c, 0.5 * x * x, c * ax - 0.5 * c * c)
        u = np.minimum(ax / c, 1.0)
        return (c * c / 6.0) * (1.0 - (1.0 - u * u) ** 3)

    def psi(self, x):
        x = np.asarray(x, dtype=np.float64)
        c = self.tuning
        if self.family == "square":
            return x.copy()
        if self.family == "huber":
            return np.clip(x, -c, c)
        u = x / c
        return np.where(np.abs(u) < 1.0, x * (1.0 - u * u) ** 2, 0.0)

    def weight(self, x):
        x = np.asarray(x, dtype=np.float64)
        c = self.tuning
        if self.family == "square":
            return np.ones_like(x)
        ax = np.abs(x)
        if self.family == "huber":
            return np.where(ax <= c, 1.0, c / np.maximum(ax, _ZERO))
        u = ax / c
        return np.where(u < 1.0, (1.0 - u * u) ** 2, 0.0)

    def __call__(self, x):
        return self.rho(x)

    def to_dict(self) -> dict:
        return {"family": self.family, "tuning": self.tuning}


def square() -> RobustLoss:
    return RobustLoss("square")


def huber(c: float = 1.345) -> RobustLoss:
    return RobustLoss("huber", c)


def bisquare(c: float = 4.685) -> RobustLoss:
    return RobustLoss("bisquare", c)


def make_loss(family: str, c: float | None = None) -> RobustLoss:
    """Loss of the named family; ``c=None`` picks the family default."""
    if family not in DEFAULT_TUNING:
        raise ValueError(f"unknown loss family {family!r}; expected one of {_FAMILIES}")
    return RobustLoss(family, DEFAULT_TUNING[family] if c is None else c)


def loss_eval(loss: RobustLoss, x: float) -> tuple[float, float, float]:
    """Return ``(rho(x), psi(x), weight(x))`` for a scalar ``x``."""
    return float(loss.rho(x)), float(loss.psi(x)), float(loss.weight(x))
