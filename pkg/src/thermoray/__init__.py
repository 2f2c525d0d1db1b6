"""Numerical checks for thermostat flows on surfaces and the X-ray transform."""
from ._jit import backend
from .geometry import (ChartFunction, ConformalSurface, ThermostatParams, divergence_free_field,
                       gaussian_curvature, homogeneous_thermostat, rotate90)
from .frame import SMScalarField, TorusGrid, apply_frame, liouville_integrate, verify_commutators
from .flow import SMPoint, Trajectory, check_linearized_flow, integrate_flow, integrate_jacobi

__version__ = "0.1.0"
