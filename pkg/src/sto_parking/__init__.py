"""Segmented trajectory optimization for parking maneuvers."""
from .geom2d import BufferedObstacle, Disk, EllipseShape, Polygon
from .sto import (LabeledPath, PathSegment, Segment, SegmentedTrajectory, StoParams, StoResult,
                  optimize, path_length, plan_simple_speed)
from .vehicle import VehicleGeometry

__version__ = "0.1.0"

__all__ = [
    "BufferedObstacle", "Disk", "EllipseShape", "Polygon", "LabeledPath", "PathSegment", "Segment",
    "SegmentedTrajectory", "StoParams", "StoResult", "VehicleGeometry", "optimize", "path_length",
    "plan_simple_speed",
]
