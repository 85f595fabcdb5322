"""Sperm morphology measurement from instance-aware part masks."""
from __future__ import annotations

__version__ = "0.1.0"

from .config import MeasurementConfig, load_config
from .derivatives import DerivativeFields, GaussianSpec, derivative_fields
from .endpoint import cos_alpha, filter_endpoints, momentum_update, reconstruct_endpoint
from .estimator import SpermMorphometer
from .geometry import fit_ellipse, fit_rectangle
from .metrics import MetricReport, ap_p, ap_p_vol, evaluate, miou, pcp
from .morphometry import (
    MorphReport,
    head_midpiece_angle,
    measure_sperm,
    part_areas,
    tail_curvature,
    tail_length,
    tail_width,
)
from .raster import InstancePartMask, PartLabel, ScalarImage, load_image, load_mask
from .steger import CenterPoint, Centerline, detect_candidates, link_centerlines
from .synth import CurveSpec, generate_batch, render_curve, render_sperm_phantom

__all__ = [
    "CenterPoint",
    "Centerline",
    "CurveSpec",
    "DerivativeFields",
    "GaussianSpec",
    "InstancePartMask",
    "MeasurementConfig",
    "MetricReport",
    "MorphReport",
    "PartLabel",
    "ScalarImage",
    "SpermMorphometer",
    "ap_p",
    "ap_p_vol",
    "cos_alpha",
    "derivative_fields",
    "detect_candidates",
    "evaluate",
    "filter_endpoints",
    "fit_ellipse",
    "fit_rectangle",
    "generate_batch",
    "head_midpiece_angle",
    "link_centerlines",
    "load_config",
    "load_image",
    "load_mask",
    "measure_sperm",
    "miou",
    "momentum_update",
    "part_areas",
    "pcp",
    "reconstruct_endpoint",
    "render_curve",
    "render_sperm_phantom",
    "tail_curvature",
    "tail_length",
    "tail_width",
]
