"""1-D magnetic Schrodinger operators with BV coefficients and measure
potentials: exact piecewise resolvent solves, limiting-absorption sweeps,
Carleman weight construction, scattering resonances, and propagator decay.
"""

from .bvcalc import PiecewiseBV, SignedMeasure, cumulative, derivative_measure, integrate, product_rule_check
from .operator import CoefficientSpec, GridFunction, SpectralPoint, form_lower_bound, jump_rule, quadratic_form

__version__ = "0.1.0"
