"""
Built-in metric catalog

flat, conformal_gaussian, conformal_saddle, diag_perturb, shear_perturb.
All members supply analytic first and second derivatives; conformal members
also supply the closed-form scalar curvature R = -8 u^-5 Lap(u).
"""
from abc import abstractmethod
from typing import Optional, Sequence, Tuple

import numpy as np

from .base import Box, MetricField


class FlatMetric(MetricField):
    """Euclidean metric"""

    name = "flat"

    @property
    def is_flat(self) -> bool:
        return True

    def metric_components(self, points: np.ndarray) -> np.ndarray:
        n = len(points)
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()

    def metric_derivatives(self, points: np.ndarray) -> np.ndarray:
        return np.zeros((len(points), 3, 3, 3))

    def metric_second_derivatives(self, points: np.ndarray) -> np.ndarray:
        return np.zeros((len(points), 3, 3, 3, 3))

    def scalar_curvature_oracle(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(len(points))


class ConformalMetric(MetricField):
    """g = u^4 * delta for a positive conformal factor u"""

    @abstractmethod
    def factor(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (u, du, d2u) with shapes (n,), (n, 3), (n, 3, 3)"""
        pass

    def metric_components(self, points: np.ndarray) -> np.ndarray:
        u, _, _ = self.factor(points)
        return (u ** 4)[:, None, None] * np.eye(3)

    def metric_derivatives(self, points: np.ndarray) -> np.ndarray:
        u, du, _ = self.factor(points)
        return (4.0 * u[:, None] ** 3 * du)[:, :, None, None] * np.eye(3)

    def metric_second_derivatives(self, points: np.ndarray) -> np.ndarray:
        u, du, d2u = self.factor(points)
        outer = np.einsum("na,nb->nab", du, du)
        d2phi = 12.0 * u[:, None, None] ** 2 * outer + 4.0 * u[:, None, None] ** 3 * d2u
        return d2phi[:, :, :, None, None] * np.eye(3)

    def scalar_curvature_oracle(self, points: np.ndarray) -> np.ndarray:
        u, _, d2u = self.factor(points)
        return -8.0 * np.trace(d2u, axis1=1, axis2=2) / u ** 5


class ConformalGaussian(ConformalMetric):
    """u = 1 + eps * exp(-|x - c|^2 / sigma^2)"""

    name = "conformal_gaussian"

    def __init__(self, box: Box, eps: float = 0.1, sigma: float = 1.0,
                 center: Sequence[float] = (0.0, 0.0, 0.0), h_fd: Optional[float] = None):
        super().__init__(box, h_fd)
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        if eps <= -1.0:
            raise ValueError(f"eps must exceed -1 for a positive factor, got {eps}")
        self.eps = float(eps)
        self.sigma = float(sigma)
        self.center = np.asarray(center, dtype=float).reshape(3)

    def factor(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        s2 = self.sigma ** 2
        bump = self.eps * np.exp(-np.sum(x * x, axis=1) / s2)
        u = 1.0 + bump
        du = bump[:, None] * (-2.0 * x / s2)
        d2u = bump[:, None, None] * (4.0 * np.einsum("na,nb->nab", x, x) / s2 ** 2
                                     - 2.0 * np.eye(3) / s2)
        return u, du, d2u

    def describe(self) -> str:
        return f"conformal_gaussian(eps={self.eps}, sigma={self.sigma}, center={self.center.tolist()})"


class ConformalSaddle(ConformalMetric):
    """
    u = 1 + eps*(X^2 + Y^2 - 2 Z^2) - delta*|X|^2 with X = x - c

    Lap(u) = -6 delta, so R = 48 delta u^-5 >= 0. Vertical faces of a box
    centered at c are mean convex when delta < eps.
    """

    name = "conformal_saddle"

    def __init__(self, box: Box, eps: float = 0.1, delta: float = 0.05,
                 center: Sequence[float] = (0.5, 0.5, 0.5), h_fd: Optional[float] = None):
        super().__init__(box, h_fd)
        self.eps = float(eps)
        self.delta = float(delta)
        self.center = np.asarray(center, dtype=float).reshape(3)
        self._hessian = np.diag([2.0 * (self.eps - self.delta),
                                 2.0 * (self.eps - self.delta),
                                 -4.0 * self.eps - 2.0 * self.delta])

    def factor(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        u = 1.0 + 0.5 * np.einsum("na,ab,nb->n", x, self._hessian, x)
        du = x @ self._hessian
        d2u = np.broadcast_to(self._hessian, (len(x), 3, 3)).copy()
        return u, du, d2u

    def describe(self) -> str:
        return f"conformal_saddle(eps={self.eps}, delta={self.delta}, center={self.center.tolist()})"


class BumpPerturbation(MetricField):
    """g = I + eps * b(x) * P with a Gaussian bump b and a constant symmetric pattern P"""

    pattern = np.zeros((3, 3))

    def __init__(self, box: Box, eps: float = 0.1, sigma: float = 0.5,
                 center: Sequence[float] = (0.5, 0.5, 0.5), h_fd: Optional[float] = None):
        super().__init__(box, h_fd)
        self.eps = float(eps)
        self.sigma = float(sigma)
        self.center = np.asarray(center, dtype=float).reshape(3)

    def _bump(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        s2 = self.sigma ** 2
        b = np.exp(-np.sum(x * x, axis=1) / s2)
        db = b[:, None] * (-2.0 * x / s2)
        d2b = b[:, None, None] * (4.0 * np.einsum("na,nb->nab", x, x) / s2 ** 2
                                  - 2.0 * np.eye(3) / s2)
        return b, db, d2b

    def metric_components(self, points: np.ndarray) -> np.ndarray:
        b, _, _ = self._bump(points)
        return np.eye(3) + self.eps * b[:, None, None] * self.pattern

    def metric_derivatives(self, points: np.ndarray) -> np.ndarray:
        _, db, _ = self._bump(points)
        return self.eps * db[:, :, None, None] * self.pattern

    def metric_second_derivatives(self, points: np.ndarray) -> np.ndarray:
        _, _, d2b = self._bump(points)
        return self.eps * d2b[:, :, :, None, None] * self.pattern

    def describe(self) -> str:
        return f"{self.name}(eps={self.eps}, sigma={self.sigma}, center={self.center.tolist()})"


class DiagPerturb(BumpPerturbation):
    """Non-conformal test metric: g_ii = 1 + eps * w_i * b(x)"""

    name = "diag_perturb"
    pattern = np.diag([1.0, 0.5, 0.25])


class ShearPerturb(BumpPerturbation):
    """Off-diagonal test metric: g_12 = g_21 = eps * b(x); bends vertical cube edges"""

    name = "shear_perturb"
    pattern = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
