"""
Metric fields and their curvature
"""
from .base import Box, CallableMetric, MetricField, evaluate_metric
from .catalog import (
    ConformalGaussian,
    ConformalMetric,
    ConformalSaddle,
    DiagPerturb,
    FlatMetric,
    ShearPerturb,
)
from .curvature import (
    CurvatureBatch,
    CurvatureTensors,
    ScalarSignReport,
    curvature_at,
    curvature_batch,
    sample_points,
    scalar_curvature,
    verify_scalar_sign,
)
from .factory import MetricFactory, parse_metric_spec

__all__ = [
    "Box",
    "CallableMetric",
    "MetricField",
    "evaluate_metric",
    "ConformalGaussian",
    "ConformalMetric",
    "ConformalSaddle",
    "DiagPerturb",
    "FlatMetric",
    "ShearPerturb",
    "CurvatureBatch",
    "CurvatureTensors",
    "ScalarSignReport",
    "curvature_at",
    "curvature_batch",
    "sample_points",
    "scalar_curvature",
    "verify_scalar_sign",
    "MetricFactory",
    "parse_metric_spec",
]
