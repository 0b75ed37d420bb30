"""Periodic averaging on manifolds with a free S1-action.

Subpackages and modules:

``geometry``    bundle models, distances, horizontal lifts, fiber phases
``flows``       integration of flows, flow differentials, pullbacks
``averaging``   averaging and integrating operators, homological solution
``normalform``  near-identity maps and first-order normal forms
``bounds``      Gronwall estimates and the constants of the O(eps) estimate
``vfdsl``       expression language and configuration files
``harness``     end-to-end sweeps and CSV output (CLI in ``peravg.cli``)
"""
from .errors import (BlowUp, ConfigError, DomainError, DomainExit, FirstIntegralViolated,
                     NotInvariant, NotSameFiber, PeravgError, StepUnderflow)
from .fields import ScalarField, VectorField
from .geometry import HopfBundle, OrbitPoint, Point, TangentVector, TrivialBundle
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlowUp", "ConfigError", "DomainError", "DomainExit", "FirstIntegralViolated",
    "HopfBundle", "NotInvariant", "NotSameFiber", "OrbitPoint", "PeravgError", "Point",
    "ScalarField", "StepUnderflow", "TangentVector", "TrivialBundle", "VectorField",
]
