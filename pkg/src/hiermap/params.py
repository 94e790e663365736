"""Scalar model and solver parameters."""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace
from typing import Optional


@dataclass(frozen=True)
class ModelParams:
    """All scalar knobs of the hierarchical model and the MAP solver.

    ``lam`` is the residual weight; ``None`` means ``1 / sigma**2``.
    ``kappa`` is the noise scaling exponent; ``None`` means ``kappa = alpha``.
    ``delta`` is the outer decrease threshold; ``None`` means
    ``1e-8 * (1 + |F0|)`` with ``F0`` the objective at the initial guess.
    ``logdet_exponent`` is the power of ``N`` multiplying the log-det term;
    ``None`` means ``-alpha``.
    """

    eps: float
    alpha: float = 1.0
    q: float = 2.0
    s: float = 0.35
    sigma: float = 5e-3
    lam: Optional[float] = None
    kappa: Optional[float] = None
    delta: Optional[float] = None
    max_iter: int = 50
    logdet_exponent: Optional[float] = None
    # inner v-step controls
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40
    inner_max_iter: int = 200
    inner_tol: float = 1e-12
    preconditioned: bool = True
    fold_v: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not 0 < self.s < 0.5:
            raise ValueError(f"s must lie in (0, 1/2), got {self.s}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")

    @property
    def residual_weight(self) -> float:
        return 1.0 / self.sigma**2 if self.lam is None else float(self.lam)

    @property
    def noise_exponent(self) -> float:
        return self.alpha if self.kappa is None else float(self.kappa)

    def logdet_weight(self, N: int) -> float:
        power = -self.alpha if self.logdet_exponent is None else self.logdet_exponent
        return float(N) ** power

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)
