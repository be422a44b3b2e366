"""
Polyhedral domains, face and edge measurements, and exact wedge geometry
"""
from .domain import Edge, ModelAngles, PolyhedralDomain, SideFace
from .measure import (
    EdgeAngleCheck,
    HypothesisReport,
    MeanConvexityReport,
    check_hypotheses,
    check_mean_convexity,
    dihedral_angle,
    face_mean_curvature,
    face_mean_curvature_batch,
    face_normal_field,
    face_second_form,
)
from .wedge import (
    Plane,
    SliceIdentity,
    Wedge,
    angle_window,
    cone_slice_identity,
    corner_angle,
    corner_angle_from_planes,
    corner_angle_monotonicity_check,
    measure_contact_angles,
    plane_from_contact_angles,
    slice_section,
)

__all__ = [
    "Edge",
    "ModelAngles",
    "PolyhedralDomain",
    "SideFace",
    "EdgeAngleCheck",
    "HypothesisReport",
    "MeanConvexityReport",
    "check_hypotheses",
    "check_mean_convexity",
    "dihedral_angle",
    "face_mean_curvature",
    "face_mean_curvature_batch",
    "face_normal_field",
    "face_second_form",
    "Plane",
    "SliceIdentity",
    "Wedge",
    "angle_window",
    "cone_slice_identity",
    "corner_angle",
    "corner_angle_from_planes",
    "corner_angle_monotonicity_check",
    "measure_contact_angles",
    "plane_from_contact_angles",
    "slice_section",
]
