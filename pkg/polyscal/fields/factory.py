"""
Factory for creating metric fields by catalog name
"""
import re
from typing import Any, Dict, List, Optional, Tuple, Type

from loguru import logger

from .base import Box, MetricField
from .catalog import (
    ConformalGaussian,
    ConformalSaddle,
    DiagPerturb,
    FlatMetric,
    ShearPerturb,
)

_SPEC_PATTERN = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_metric_spec(spec: str) -> Tuple[str, List[float]]:
    """
    Split a catalog string such as "conformal_gaussian(0.1, 1)" into its name
    and positional float arguments

    Raises:
        ValueError: If the string is not of the form name or name(a, b, ...)
    """
    match = _SPEC_PATTERN.match(spec)
    if not match:
        raise ValueError(f"Malformed metric specification: {spec!r}")
    name, body = match.group(1).lower(), match.group(2)
    if body is None or not body.strip():
        return name, []
    try:
        args = [float(part) for part in body.split(",")]
    except ValueError:
        raise ValueError(f"Metric arguments must be numbers: {spec!r}")
    return name, args


class MetricFactory:
    """
    Factory for creating metric field instances

    Usage:
        field = MetricFactory.create("conformal_gaussian(0.1, 1.0)", box=box)
        field = MetricFactory.create("diag_perturb", box=box, eps=0.2)
    """

    _registry: Dict[str, Type[MetricField]] = {
        "flat": FlatMetric,
        "conformal_gaussian": ConformalGaussian,
        "conformal_saddle": ConformalSaddle,
        "diag_perturb": DiagPerturb,
        "shear_perturb": ShearPerturb,
    }

    @staticmethod
    def create(metric_type: str, box: Box, h_fd: Optional[float] = None, **kwargs: Any) -> MetricField:
        """
        Create a metric field

        Args:
            metric_type: Catalog name, optionally with positional arguments
            box: Region where the metric is evaluated
            h_fd: Optional finite-difference step
            **kwargs: Keyword parameters for the metric constructor

        Returns:
            MetricField instance

        Raises:
            ValueError: If metric_type is not registered or its arguments do not fit
        """
        name, args = parse_metric_spec(metric_type)
        cls = MetricFactory._registry.get(name)
        if cls is None:
            raise ValueError(
                f"Unsupported metric type: {name}. "
                f"Supported types: {', '.join(MetricFactory.get_supported_metrics())}"
            )
        try:
            field = cls(box, *args, h_fd=h_fd, **kwargs)
        except TypeError as e:
            raise ValueError(f"Bad arguments for metric {name}: {e}")
        logger.info(f"Creating metric field: {field.describe()}")
        return field

    @staticmethod
    def register(name: str, cls: Type[MetricField]) -> None:
        """Register a custom metric class under a catalog name"""
        if not issubclass(cls, MetricField):
            raise ValueError(f"{cls!r} is not a MetricField subclass")
        MetricFactory._registry[name.lower()] = cls
        logger.debug(f"Registered metric type: {name}")

    @staticmethod
    def get_supported_metrics() -> List[str]:
        """Get list of registered metric names"""
        return sorted(MetricFactory._registry)
