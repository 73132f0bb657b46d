"""Segment-based inspection coverage planning with occlusion-aware view angles.

Main entry points: :class:`GlobalCoveragePlanner` (viewpoint sequence),
:func:`static_plan` and :class:`MpcController` (trajectory and tracking),
:class:`ViewAnglePlanner` (yaw selection), :func:`run_mission` (closed-loop
simulation) and the ``asip`` command line.
"""

from .bspline import BSplineTrajectory, CostWeights, DistanceField, static_plan
from .global_planner import (
    GlobalCoveragePlanner,
    GlobalPlannerParams,
    InspectionPlan,
    NaiveCoveragePlanner,
    plan_global,
)
from .mpc import MpcController, mpc_step
from .scenes import ScenarioConfig, generate_occlusion_scenario, generate_scene
from .simulator import MissionResult, SimConfig, SimulationFault, run_mission
from .view_angle import ViewAnglePlanner, select_view_angle, view_weight
from .world import CellState, GridSpec, OccupancyGrid, ReferenceMap, SensorModel

__version__ = "0.1.0"

__all__ = [
    "BSplineTrajectory",
    "CellState",
    "CostWeights",
    "DistanceField",
    "GlobalCoveragePlanner",
    "GlobalPlannerParams",
    "GridSpec",
    "InspectionPlan",
    "MissionResult",
    "MpcController",
    "NaiveCoveragePlanner",
    "OccupancyGrid",
    "ReferenceMap",
    "ScenarioConfig",
    "SensorModel",
    "SimConfig",
    "SimulationFault",
    "ViewAnglePlanner",
    "generate_occlusion_scenario",
    "generate_scene",
    "mpc_step",
    "plan_global",
    "run_mission",
    "select_view_angle",
    "static_plan",
    "view_weight",
]
