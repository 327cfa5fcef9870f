"""Moving-frame geometry of surfaces in S^5: analysis, identity checks and reconstruction."""

from .errors import CsgeoError
from .exprlang import Jet2, SurfaceAST, eval_jet2, load_surface_spec, parse_surface_spec
from .frames import AdaptedFrame, adapted_frame
from .connection import ConnectionTable, connection_table
from .identities import FieldSet, IdentityReport, identity_report
from .analysis import Analysis, analyze
from .reconstruct import (
    InvariantConstants,
    MaurerCartan,
    assemble_maurer_cartan,
    circle_family,
    integrate_frame,
    reconstruct,
    roundtrip_verify,
    solve_constant_invariants,
)
from .surface import Grid

__all__ = [
    "AdaptedFrame", "Analysis", "ConnectionTable", "CsgeoError", "FieldSet", "Grid", "IdentityReport",
    "InvariantConstants", "Jet2", "MaurerCartan", "SurfaceAST", "adapted_frame", "analyze",
    "assemble_maurer_cartan", "circle_family", "connection_table", "eval_jet2", "identity_report",
    "integrate_frame", "load_surface_spec", "parse_surface_spec", "reconstruct", "roundtrip_verify",
    "solve_constant_invariants",
]

__version__ = "0.1.0"
