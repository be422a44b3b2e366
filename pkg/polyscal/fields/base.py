"""
Base interface for Riemannian metric fields on a box region of 3-space
"""
import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config import settings
from ..errors import NotSPD, OutOfDomain, StencilClipped


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box [lo, hi] in P-coordinates"""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError(f"Empty box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, points: np.ndarray, padding: Optional[float] = None) -> "Box":
        """Bounding box of points, padded by a fraction of its largest side"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = (settings.box_padding if padding is None else padding) * float(np.max(hi - lo))
        return cls(lo - pad, hi + pad)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((pts >= self.lo + margin) & (pts <= self.hi - margin), axis=1)

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.minimum(pts - self.lo, self.hi - pts).min(axis=1)


class MetricField(ABC):
    """
    Abstract Riemannian metric g on a box

    Subclasses evaluate the 3x3 component matrix at a batch of points and may
    supply analytic first/second derivatives. Evaluators are pure functions of
    the point, so a field can be shared between worker threads.
    """

    name = "custom"

    def __init__(self, box: Box, h_fd: Optional[float] = None):
        """
        Args:
            box: region where the metric is defined
            h_fd: finite-difference step (defaults to a fraction of the box diameter)
        """
        self.box = box
        self.h_fd = float(h_fd) if h_fd is not None else settings.get_fd_step(box.diameter)

    @property
    def is_flat(self) -> bool:
        """True when g is the Euclidean metric (enables exact fast paths)"""
        return False

    @abstractmethod
    def metric_components(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate g at points

        Args:
            points: array of shape (n, 3)

        Returns:
            array of shape (n, 3, 3)
        """
        pass

    def metric_derivatives(self, points: np.ndarray) -> Optional[np.ndarray]:
        """Analytic first derivatives d[n, a, i, j] = d_a g_ij, or None"""
        return None

    def metric_second_derivatives(self, points: np.ndarray) -> Optional[np.ndarray]:
        """Analytic second derivatives d2[n, a, b, i, j] = d_a d_b g_ij, or None"""
        return None

    def scalar_curvature_oracle(self, points: np.ndarray) -> Optional[np.ndarray]:
        """Closed-form scalar curvature when known (used by tests and reports)"""
        return None

    def describe(self) -> str:
        return self.name

    def with_box(self, box: Box, h_fd: Optional[float] = None) -> "MetricField":
        """Copy of this field restricted to another box"""
        clone = copy.copy(self)
        clone.box = box
        clone.h_fd = float(h_fd) if h_fd is not None else settings.get_fd_step(box.diameter)
        return clone

    def with_step(self, h_fd: float) -> "MetricField":
        """Copy of this field with another finite-difference step"""
        clone = copy.copy(self)
        clone.h_fd = float(h_fd)
        return clone

    # -----------------------------------
    # Checked evaluation
    # -----------------------------------

    def components(self, points: np.ndarray) -> np.ndarray:
        """Metric at points, raising OutOfDomain outside the box"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        self._check_inside(pts)
        return self.metric_components(pts)

    def derivatives(self, points: np.ndarray) -> np.ndarray:
        """First derivatives, analytic when supplied, else central differences"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        analytic = self.metric_derivatives(pts)
        if analytic is not None:
            self._check_inside(pts)
            return analytic
        return self.fd_derivatives(pts)

    def fd_derivatives(self, points: np.ndarray) -> np.ndarray:
        """Second-order central differences of the components"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        h = self.h_fd
        self._check_stencil(pts, h)
        n = len(pts)
        shifts = np.concatenate([h * np.eye(3), -h * np.eye(3)])  # (6, 3)
        stencil = (pts[:, None, :] + shifts[None, :, :]).reshape(-1, 3)
        g = self.metric_components(stencil).reshape(n, 6, 3, 3)
        return (g[:, :3] - g[:, 3:]) / (2.0 * h)

    def _check_inside(self, points: np.ndarray) -> None:
        inside = self.box.contains(points)
        if not np.all(inside):
            bad = points[~inside][0]
            raise OutOfDomain(f"Point {bad.tolist()} outside metric box", {"metric": self.name})

    def _check_stencil(self, points: np.ndarray, h: float) -> None:
        self._check_inside(points)
        if np.any(self.box.distance_to_boundary(points) < h):
            raise StencilClipped(f"Finite-difference stencil (h={h:.3g}) exits the metric box",
                                 {"metric": self.name})


class CallableMetric(MetricField):
    """Metric built from user-supplied evaluators (programmatic registration)"""

    def __init__(self, box: Box, components, derivatives=None, second_derivatives=None,
                 name: str = "custom", h_fd: Optional[float] = None):
        super().__init__(box, h_fd)
        self._components = components
        self._derivatives = derivatives
        self._second = second_derivatives
        self.name = name

    def metric_components(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self._components(points), dtype=float).reshape(-1, 3, 3)

    def metric_derivatives(self, points: np.ndarray) -> Optional[np.ndarray]:
        if self._derivatives is None:
            return None
        return np.asarray(self._derivatives(points), dtype=float).reshape(-1, 3, 3, 3)

    def metric_second_derivatives(self, points: np.ndarray) -> Optional[np.ndarray]:
        if self._second is None:
            return None
        return np.asarray(self._second(points), dtype=float).reshape(-1, 3, 3, 3, 3)


def evaluate_metric(field: MetricField, x) -> np.ndarray:
    """
    Evaluate g at a single point with the SPD contract enforced

    Raises:
        OutOfDomain: x outside the metric box
        NotSPD: matrix not symmetric or has a nonpositive eigenvalue
    """
    g = field.components(np.asarray(x, dtype=float).reshape(1, 3))[0]
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > 1e-12 * scale:
        raise NotSPD(f"Metric not symmetric at {list(x)}", {"metric": field.name})
    smallest = float(np.linalg.eigvalsh(0.5 * (g + g.T))[0])
    if smallest <= 0.0:
        raise NotSPD(f"Metric eigenvalue {smallest:.3g} <= 0 at {list(x)}", {"metric": field.name})
    return 0.5 * (g + g.T)
