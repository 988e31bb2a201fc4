"""Model-free adaptive control with disturbance compensation.

Exact dynamic linearization of known test plants, the SISO/MIMO control laws,
a disturbance estimator, frozen-coefficient pole analysis and a simulation
harness with a command-line front end.
"""

from .analysis import (MatrixZPolynomial, StabilityReport, ZPolynomial, char_poly, disturbance_transfer,
                       poles, steady_state_error_ramp)
from .controller import Compensation, ControllerConfig, control_law, cost, mimo_control, optimality_check, siso_control
from .edlm import PgVector, Pjm, TaylorRemainder, assemble_pg, identity_residual, predict_increment, taylor_eps_scalar
from .errors import MfacError
from .harness import ExperimentConfig, SimulationTrace, export_trace, load_config, run, sweep, table1
from .observer import ObserverState, observer_step, residual_disturbance
from .plants import PLANTS, disturbance, exact_pg, get_plant, model_output, plant_step, reference
from .signals import RegressionVector, SampleHistory, Signal, assemble_regression

__version__ = "0.1.0"
