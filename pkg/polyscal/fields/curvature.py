"""
Curvature tensors of a metric field

Christoffel symbols, Riemann, Ricci and scalar curvature are computed in a
single vectorized pass over a batch of points. Second derivatives of the metric
come from the field when it supplies them, otherwise from a 19-point central
stencil (center, +-e_a, +-e_a+-e_b) of the components.

Index conventions:
    christoffel[k, i, j] = Gamma^k_ij
    riemann[i, k, l, m]  = R_iklm (all lowered), R_iklm = K (g_il g_km - g_im g_kl)
                           for constant sectional curvature K
    ricci[i, k]          = g^lm R_limk
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from .base import Box, MetricField


@dataclass(frozen=True)
class CurvatureTensors:
    """Curvature data at one point"""
    point: np.ndarray
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float

    def sectional(self, e1: np.ndarray, e2: np.ndarray) -> float:
        """Sectional curvature of the plane spanned by e1, e2"""
        num = float(np.einsum("iklm,i,k,l,m->", self.riemann, e1, e2, e1, e2))
        g = self.metric
        den = float((e1 @ g @ e1) * (e2 @ g @ e2) - (e1 @ g @ e2) ** 2)
        return num / den

    def ricci_normal(self, normal: np.ndarray) -> float:
        """Ric(N, N) for a g-unit vector N"""
        return float(normal @ self.ricci @ normal)


@dataclass(frozen=True)
class CurvatureBatch:
    """Curvature data over a batch of points, arrays with a leading point axis"""
    points: np.ndarray
    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def at(self, index: int) -> CurvatureTensors:
        return CurvatureTensors(
            point=self.points[index],
            metric=self.metric[index],
            christoffel=self.christoffel[index],
            riemann=self.riemann[index],
            ricci=self.ricci[index],
            scalar=float(self.scalar[index]),
        )

    def sectional(self, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
        """Sectional curvature per point for per-point vectors e1, e2 of shape (n, 3)"""
        num = np.einsum("qiklm,qi,qk,ql,qm->q", self.riemann, e1, e2, e1, e2)
        g = self.metric
        g11 = np.einsum("qi,qij,qj->q", e1, g, e1)
        g22 = np.einsum("qi,qij,qj->q", e2, g, e2)
        g12 = np.einsum("qi,qij,qj->q", e1, g, e2)
        return num / (g11 * g22 - g12 ** 2)

    def ricci_normal(self, normals: np.ndarray) -> np.ndarray:
        """Ric(N, N) per point for g-unit normals of shape (n, 3)"""
        return np.einsum("qi,qik,qk->q", normals, self.ricci, normals)


# -----------------------------------
# Stencil derivatives
# -----------------------------------

def _stencil_offsets() -> np.ndarray:
    offsets = [np.zeros(3)]
    eye = np.eye(3)
    for a in range(3):
        offsets += [eye[a], -eye[a]]
    for a in range(3):
        for b in range(a + 1, 3):
            for sa in (1.0, -1.0):
                for sb in (1.0, -1.0):
                    offsets.append(sa * eye[a] + sb * eye[b])
    return np.array(offsets)


_OFFSETS = _stencil_offsets()  # (19, 3)


def _index(offset) -> int:
    return int(np.flatnonzero(np.all(_OFFSETS == np.asarray(offset, dtype=float), axis=1))[0])


def fd_metric_jets(field: MetricField, points: np.ndarray, h: Optional[float] = None):
    """
    Metric, first and second derivatives from central differences

    Returns:
        (g, dg, d2g) with shapes (n,3,3), (n,3,3,3), (n,3,3,3,3)
    """
    h = field.h_fd if h is None else h
    field._check_stencil(points, h)
    n = len(points)
    stencil = (points[:, None, :] + h * _OFFSETS[None, :, :]).reshape(-1, 3)
    values = field.metric_components(stencil).reshape(n, len(_OFFSETS), 3, 3)
    eye = np.eye(3)
    g = values[:, 0]
    dg = np.empty((n, 3, 3, 3))
    d2g = np.empty((n, 3, 3, 3, 3))
    for a in range(3):
        plus, minus = values[:, _index(eye[a])], values[:, _index(-eye[a])]
        dg[:, a] = (plus - minus) / (2.0 * h)
        d2g[:, a, a] = (plus - 2.0 * g + minus) / h ** 2
        for b in range(a + 1, 3):
            pp = values[:, _index(eye[a] + eye[b])]
            pm = values[:, _index(eye[a] - eye[b])]
            mp = values[:, _index(-eye[a] + eye[b])]
            mm = values[:, _index(-eye[a] - eye[b])]
            mixed = (pp - pm - mp + mm) / (4.0 * h ** 2)
            d2g[:, a, b] = mixed
            d2g[:, b, a] = mixed
    return g, dg, d2g


def metric_jets(field: MetricField, points: np.ndarray, method: str = "auto"):
    """Metric with first and second derivatives, analytic when the field supplies them"""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if method not in ("auto", "fd"):
        raise ValueError(f"Unsupported derivative method: {method}. Supported methods: auto, fd")
    if method == "auto":
        d2g = field.metric_second_derivatives(pts)
        if d2g is not None:
            g = field.components(pts)
            return g, field.derivatives(pts), d2g
    g, dg, d2g = fd_metric_jets(field, pts)
    if method == "auto":
        analytic = field.metric_derivatives(pts)
        if analytic is not None:
            dg = analytic
    return g, dg, d2g


# -----------------------------------
# Tensors
# -----------------------------------

def christoffel_first_kind(dg: np.ndarray) -> np.ndarray:
    """Gamma_{l,ij} stored as [q, i, j, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2"""
    return 0.5 * (np.einsum("qijl->qijl", dg) + np.einsum("qjil->qijl", dg)
                  - np.einsum("qlij->qijl", dg))


def christoffel_symbols(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma^k_ij from the inverse metric and first derivatives (batched)"""
    return np.einsum("qkl,qijl->qkij", ginv, christoffel_first_kind(dg))


def curvature_batch(field: MetricField, points: np.ndarray, method: str = "auto") -> CurvatureBatch:
    """
    Curvature tensors at a batch of points

    Args:
        field: metric field
        points: array of shape (n, 3)
        method: "auto" uses supplied derivatives when available, "fd" forces the stencil

    Raises:
        OutOfDomain: a point lies outside the metric box
        StencilClipped: a finite-difference stencil leaves the box
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    g, dg, d2g = metric_jets(field, pts, method)
    ginv = np.linalg.inv(g)
    gam = christoffel_symbols(ginv, dg)

    second = 0.5 * (np.einsum("qklim->qiklm", d2g) + np.einsum("qimkl->qiklm", d2g)
                    - np.einsum("qkmil->qiklm", d2g) - np.einsum("qilkm->qiklm", d2g))
    quadratic = (np.einsum("qnp,qnkl,qpim->qiklm", g, gam, gam)
                 - np.einsum("qnp,qnkm,qpil->qiklm", g, gam, gam))
    riemann = second + quadratic
    ricci = np.einsum("qlm,qlimk->qik", ginv, riemann)
    ricci = 0.5 * (ricci + ricci.transpose(0, 2, 1))
    scalar = np.einsum("qik,qik->q", ginv, ricci)
    return CurvatureBatch(points=pts, metric=g, inverse=ginv, christoffel=gam,
                          riemann=riemann, ricci=ricci, scalar=scalar)


def curvature_at(field: MetricField, x: Sequence[float], method: str = "auto") -> CurvatureTensors:
    """Curvature tensors at a single point"""
    return curvature_batch(field, np.asarray(x, dtype=float).reshape(1, 3), method).at(0)


def scalar_curvature(field: MetricField, points: np.ndarray, method: str = "auto") -> np.ndarray:
    return curvature_batch(field, points, method).scalar


# -----------------------------------
# Scalar curvature sign
# -----------------------------------

@dataclass(frozen=True)
class ScalarSignReport:
    """Minimum sampled scalar curvature"""
    min_scalar: float
    argmin: np.ndarray
    samples: int
    tolerance: float
    passed: bool

    def to_dict(self):
        return {
            "min_scalar": self.min_scalar,
            "argmin": self.argmin.tolist(),
            "samples": self.samples,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def sample_points(box: Box, count: int, seed: int = 0, margin: float = 0.0) -> np.ndarray:
    """Uniform random points in a box, shrunk by margin on every side"""
    rng = np.random.default_rng(seed)
    lo, hi = box.lo + margin, box.hi - margin
    return lo + rng.random((count, 3)) * (hi - lo)


def verify_scalar_sign(field: MetricField, sample_points: np.ndarray,
                       tolerance: float = 0.0, method: str = "auto") -> ScalarSignReport:
    """
    Check R >= -tolerance on a sample set

    Raises:
        ValueError: empty sample set
    """
    pts = np.asarray(sample_points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("Scalar sign check needs at least one sample point")
    scalar = scalar_curvature(field, pts, method)
    idx = int(np.argmin(scalar))
    report = ScalarSignReport(
        min_scalar=float(scalar[idx]),
        argmin=pts[idx].copy(),
        samples=len(pts),
        tolerance=float(tolerance),
        passed=bool(scalar[idx] >= -tolerance),
    )
    logger.debug(f"Scalar sign for {field.describe()}: min R={report.min_scalar:.6g} "
                 f"at {report.argmin.tolist()} ({'pass' if report.passed else 'fail'})")
    return report
