"""Model parameters derived from (beta, L) and an estimate of c_inf."""

from __future__ import annotations

import math
from dataclasses import dataclass

SUPERCRITICAL = "supercritical"
SUBCRITICAL = "subcritical"
CRITICAL = "critical"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class ModelParams:
    beta: float
    L: int
    H: int
    alpha: float
    c_inf: float
    c_inf_halfwidth: float
    lam: float
    lambda_c: float | None = None
    regime: str = UNDETERMINED

    def lambda_n(self, n):
        """Level-n rescaling lambda * exp(4 beta n)."""
        return self.lam * math.exp(4.0 * self.beta * n)

    @property
    def macro_threshold(self):
        """Minimum length of a macroscopic contour."""
        return macro_threshold(self.L)

    def distance_to_critical(self):
        """Relative gap |lambda - lambda_c| / lambda_c, or None if unknown."""
        if self.lambda_c is None:
            return None
        return abs(self.lam - self.lambda_c) / self.lambda_c


def macro_threshold(L):
    return math.ceil(math.log(L) ** 2)


def height_scale(beta, L):
    """Split log(L)/(4 beta) into integer and fractional parts."""
    x = math.log(L) / (4.0 * beta)
    H = math.floor(x + 1e-12)
    alpha = max(x - H, 0.0)
    return H, alpha


def classify(lam, lambda_c, rel_tol=1e-12):
    if lambda_c is None or not math.isfinite(lambda_c):
        return UNDETERMINED
    if abs(lam - lambda_c) <= rel_tol * lambda_c:
        return CRITICAL
    return SUPERCRITICAL if lam > lambda_c else SUBCRITICAL


def derive_params(beta, L, c_inf_estimate, c_inf_halfwidth=0.0, lambda_c=None):
    """Derived heights, lambda and the regime relative to lambda_c.

    ``lambda_c`` may be given directly; otherwise it is computed from the
    directed-walk tension when beta >= 1 and left undetermined below that.
    """
    for v in (beta, L, c_inf_estimate):
        if not math.isfinite(v):
            raise ValueError("non-finite input")
    if beta <= 0 or L < 2 or c_inf_estimate <= 0:
        raise ValueError("need beta > 0, L >= 2 and c_inf > 0")
    L = int(L)
    H, alpha = height_scale(beta, L)
    lam = math.exp(4.0 * beta * alpha) * c_inf_estimate * (-math.expm1(-4.0 * beta))
    if lambda_c is None and beta >= 1.0:
        lambda_c = critical_lambda(beta)
    return ModelParams(
        beta=float(beta), L=L, H=H, alpha=alpha,
        c_inf=float(c_inf_estimate), c_inf_halfwidth=float(c_inf_halfwidth),
        lam=lam, lambda_c=lambda_c, regime=classify(lam, lambda_c),
    )


def critical_lambda(beta):
    from .tension import tau_directed_walk
    from .wulff import shape_constants, wulff_unit

    wulff = wulff_unit(tau_directed_walk(beta))
    return shape_constants(beta, wulff, numeric=False).lambda_c
