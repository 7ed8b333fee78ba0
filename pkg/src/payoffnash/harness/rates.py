"""Log-log slope fits of convergence curves."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ..errors import ContractViolation


@dataclass
class RateEstimate:
    slope: float
    intercept: float
    stderr_slope: float
    window: Tuple[float, float]
    n_points: int

    def confidence_interval(self, level: float = 0.95) -> Tuple[float, float]:
        if self.n_points < 3:
            return (float("nan"), float("nan"))
        q = stats.t.ppf(0.5 + level / 2, self.n_points - 2)
        return (self.slope - q * self.stderr_slope, self.slope + q * self.stderr_slope)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["window"] = list(self.window)
        out["ci95"] = list(self.confidence_interval())
        return out


def fit_rate(table, tail_fraction: Optional[float] = None, values=None) -> RateEstimate:
    """OLS of ``log(mean_sq_dist)`` on ``log(t)`` over the tail of the curve.

    By default the window is the last decade, ``t >= t_max / 10``. With
    ``tail_fraction`` in ``(0, 1]`` it is the last fraction of ``log t``,
    i.e. ``t >= t_max ** (1 - tail_fraction)``. ``table`` may be a
    :class:`RateTable` or an array of ``t`` paired with ``values``.
    """
    if values is None:
        t, y = np.asarray(table.t, dtype=float), np.asarray(table.mean_sq_dist, dtype=float)
    else:
        t, y = np.asarray(table, dtype=float), np.asarray(values, dtype=float)
    if t.size == 0:
        raise ContractViolation("cannot fit a rate to an empty table")
    t_max = float(t.max())
    if tail_fraction is None:
        t_lo = t_max / 10.0
    else:
        if not 0 < tail_fraction <= 1:
            raise ContractViolation(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
        t_lo = t_max ** (1.0 - tail_fraction)
    sel = t >= t_lo
    if sel.sum() < 3:
        raise ContractViolation(f"need at least 3 checkpoints with t >= {t_lo:g}, have {int(sel.sum())}")
    if np.any(~(y[sel] > 0)):
        raise ContractViolation(
            "non-positive mean squared distance in the fit window; distances may have "
            "underflowed, rerun with a larger game scale"
        )
    fit = stats.linregress(np.log(t[sel]), np.log(y[sel]))
    return RateEstimate(float(fit.slope), float(fit.intercept), float(fit.stderr),
                        (float(t[sel].min()), float(t[sel].max())), int(sel.sum()))
