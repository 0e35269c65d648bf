"""Digital-twin cooperative drilling: simulation, control, and analysis."""

from .anatomy import (DEFAULT_STRUCTURES, DistanceQuery, LabeledVolume, SdfSet,
                      StructureSpec, build_sdf, carve_voxels, query_distances,
                      sdf_gradient)
from .controller import (ControlEvent, ControllerParams, ControllerState, Regime,
                         compute_gain_adjustment, detect_contact,
                         estimate_operating_structure, step_controller)
from .geometry import RigidTransform, Wrench, transform_wrench
from .metrics import ComparisonReport, MetricsReport, compare_runs, compute_metrics
from .phantom import PhantomSpec, make_phantom
from .registration import pivot_calibrate, register_point_sets
from .robot import (AdmittanceGains, KinematicChain, RobotState, default_chain,
                    forward_kinematics, jacobian, solve_admittance)
from .runlog import RunLog, load_any
from .scenario import Rates, Scenario, load_builtin_scenario, resolve_scenario
from .simulate import SimSession, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AdmittanceGains", "ComparisonReport", "ControlEvent", "ControllerParams",
    "ControllerState", "DEFAULT_STRUCTURES", "DistanceQuery", "KinematicChain",
    "LabeledVolume", "MetricsReport", "PhantomSpec", "Rates", "Regime",
    "RigidTransform", "RobotState", "RunLog", "Scenario", "SdfSet", "SimSession",
    "StructureSpec", "Wrench", "build_sdf", "carve_voxels", "compare_runs",
    "compute_gain_adjustment", "compute_metrics", "default_chain", "detect_contact",
    "estimate_operating_structure", "forward_kinematics", "jacobian",
    "load_any", "load_builtin_scenario", "make_phantom", "pivot_calibrate",
    "query_distances", "register_point_sets", "resolve_scenario", "run_simulation",
    "sdf_gradient", "solve_admittance", "step_controller", "transform_wrench",
    "__version__",
]
