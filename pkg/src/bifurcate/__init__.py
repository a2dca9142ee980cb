"""Numerical bifurcation diagrams of gradient families f(y) - x.y near fold, cusp and umbilic points."""
from __future__ import annotations

from .bifurcation_tracer import (BifurcationBranch, BifurcationDiagram, Endpoint, EndpointKind, compute_locus,
                                 scan_circle, trace_branch)
from .caustic import Caustic, trace_caustic
from .critical_points import CriticalPoint, PointClass, find_critical_points, label_at
from .diagram_validator import RuleViolation, TopologyClass, classify_topology, validate
from .field_models import FamilyKind, GeneratingFamily, ParameterPoint, PhasePoint
from .flow_engine import connection_graph, integrate, splitting

__version__ = "0.1.0"

__all__ = [
    "BifurcationBranch", "BifurcationDiagram", "Caustic", "CriticalPoint", "Endpoint", "EndpointKind",
    "FamilyKind", "GeneratingFamily", "ParameterPoint", "PhasePoint", "PointClass", "RuleViolation",
    "TopologyClass", "classify_topology", "compute_locus", "connection_graph", "find_critical_points",
    "integrate", "label_at", "scan_circle", "splitting", "trace_branch", "trace_caustic", "validate",
]
