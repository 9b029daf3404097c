"""Orientation-lifted grid and the curvature-encoding Finsler metrics.

Points live on a discrete position-orientation domain (x, y, theta) with a
periodic angular axis. Two local metrics are provided: an elastica-type
asymmetric metric ('fe') and the relaxed sub-Riemannian one with reverse
gear ('fsr'). Both are positively 1-homogeneous in the lifted vector and
multiply a data cost sampled from the orientation-score field.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

# 16 spatial directions up to radius 2 (axis, diagonal and knight moves),
# each combined with angular offsets {-1, 0, +1}, plus pure angular moves.
SPATIAL_DIRECTIONS = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 1), (2, -1), (-2, 1), (-2, -1),
    (1, 2), (1, -2), (-1, 2), (-1, -2),
]

MOVES = [(dx, dy, dt) for dx, dy in SPATIAL_DIRECTIONS for dt in (-1, 0, 1)]
MOVES += [(0, 0, 1), (0, 0, -1)]


@dataclass(frozen=True)
class LiftedGrid:
    """Regular grid over the lifted domain; spatial spacing is one pixel."""

    width: int
    height: int
    n_theta: int

    def __post_init__(self):
        if self.n_theta < 4:
            raise ConfigurationError(f"n_theta too small: {self.n_theta}")
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("grid sides must be positive")

    @property
    def h1(self):
        return 1.0

    @property
    def h2(self):
        return 2.0 * np.pi / self.n_theta

    @property
    def shape(self):
        return (self.height, self.width, self.n_theta)

    @property
    def n_points(self):
        return self.height * self.width * self.n_theta

    def flat_index(self, x, y, t):
        return (np.asarray(y) * self.width + np.asarray(x)) * self.n_theta + np.asarray(t)

    def unflatten(self, flat):
        flat = np.asarray(flat)
        t = flat % self.n_theta
        xy = flat // self.n_theta
        return xy % self.width, xy // self.width, t


@dataclass
class MetricParams:
    """Parameters of the lifted metric plus the data cost field.

    ``beta`` weights curvature inside the metric; ``beta_length`` weights it
    in the data-free length accumulated alongside the distance map (equal by
    default, but a larger value stiffens the bridge-length estimate without
    changing the geodesics).
    """

    kind: str
    epsilon: float
    beta: float
    cost: np.ndarray  # (H, W, n_theta), strictly positive
    beta_length: float = None

    def __post_init__(self):
        if self.kind not in ("fe", "fsr"):
            raise ConfigurationError(f"metric kind must be 'fe' or 'fsr', got {self.kind!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if self.beta_length is None:
            self.beta_length = self.beta
        if self.cost is not None and np.any(self.cost <= 0):
            raise ConfigurationError("cost field must be strictly positive")

    @property
    def n_theta(self):
        return self.cost.shape[2]


def finsler_factor(kind, epsilon, beta, theta, ux, uy, nu):
    """Data-free metric factor for motion (ux, uy, nu) at orientation theta.

    Broadcasts over numpy inputs. The elastica variant uses the sign
    convention that makes forward-aligned unit motion cost exactly 1.
    """
    theta = np.asarray(theta, dtype=np.float64)
    ux = np.asarray(ux, dtype=np.float64)
    uy = np.asarray(uy, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    along = ux * np.cos(theta) + uy * np.sin(theta)
    sq = ux * ux + uy * uy
    inv_e = 1.0 / float(epsilon)
    bnu2 = (beta * nu) ** 2
    if kind == "fsr":
        f2 = (
            along**2
            + bnu2
            + inv_e**2 * (sq - along**2)
            + (inv_e**2 - 1.0) * np.minimum(0.0, along) ** 2
        )
        return np.sqrt(f2)
    return np.sqrt(inv_e**2 * sq + 2.0 * inv_e * bnu2) - (inv_e - 1.0) * along


def metric_eval(params, point, vector):
    """Local cost of the lifted vector at a lifted point.

    ``point`` is (x, y, theta) with theta in radians; the data cost is
    sampled at the nearest grid node while the metric factor uses the exact
    orientation. Raises on the zero vector, where no direction is defined.
    """
    ux, uy, nu = (float(v) for v in vector)
    if ux == 0.0 and uy == 0.0 and nu == 0.0:
        raise InputError("metric is undefined for the zero vector")
    x, y, theta = (float(p) for p in point)
    h, w, n_theta = params.cost.shape
    ix = min(max(int(round(x)), 0), w - 1)
    iy = min(max(int(round(y)), 0), h - 1)
    it = int(round(theta / (2.0 * np.pi / n_theta))) % n_theta
    data = params.cost[iy, ix, it]
    return float(data * finsler_factor(params.kind, params.epsilon, params.beta,
                                       theta, ux, uy, nu))


def move_table(grid, params):
    """Per-(orientation bin, move) metric factors and data-free increments.

    Returns (moves, factors, increments): ``moves`` is an (M, 3) int array of
    (dx, dy, dt) stencil displacements, ``factors[t, m]`` the metric factor
    for move m at bin t, and ``increments[m]`` the curvature-penalized length
    sqrt(|dx|^2 + beta_length^2 dtheta^2) of move m.
    """
    moves = np.asarray(MOVES, dtype=np.int64)
    thetas = np.arange(grid.n_theta) * grid.h2
    ux = moves[:, 0] * grid.h1
    uy = moves[:, 1] * grid.h1
    nu = moves[:, 2] * grid.h2
    factors = finsler_factor(params.kind, params.epsilon, params.beta,
                             thetas[:, None], ux[None, :], uy[None, :], nu[None, :])
    increments = np.sqrt((ux**2 + uy**2) + params.beta_length**2 * nu**2)
    return moves, factors, increments
