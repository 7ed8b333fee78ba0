"""Games with deliberately wrong gradients, for fault-injection tests."""

from dataclasses import dataclass

import numpy as np

from payoffnash.games import AffineGame


@dataclass(frozen=True, eq=False)
class ShiftedGradientGame(AffineGame):
    """Canonical costs with a gradient that is off by 0.1 in one component."""

    def pseudo_gradient(self, x):
        g = super().pseudo_gradient(x)
        return g + np.array([0.1, 0.0])


@dataclass(frozen=True, eq=False)
class SaddleGradientGame(AffineGame):
    """Claims nu = 1 but reports the gradient of B = [[1, 3], [3, 1]]."""

    def pseudo_gradient(self, x):
        x = np.asarray(x, float)
        return x @ np.array([[1.0, 3.0], [3.0, 1.0]]).T


def corrupt(cls, game):
    return cls(n_players=game.n_players, dim=game.dim, action_sets=game.action_sets, nu=game.nu,
               lipschitz=game.lipschitz, name="corrupted", spec=game.spec)
