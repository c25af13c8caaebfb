"""Reactive point-cloud navigation with a velocity-orthogonal circular field."""

from .auxiliary import AuxState, ICClass, aux_state, classify
from .forces import cf_force_total, steering_force, vlc_force
from .simulator import Disturbance, Termination, Trajectory, metrics, simulate, simulate_rs
from .world import (CollisionError, Obstacle, PlannerParams, RobotState, Scenario, WorldError,
                    validate_params)

__all__ = ["AuxState", "ICClass", "aux_state", "classify", "cf_force_total", "steering_force",
           "vlc_force", "Disturbance", "Termination", "Trajectory", "metrics", "simulate",
           "simulate_rs", "CollisionError", "Obstacle", "PlannerParams", "RobotState", "Scenario",
           "WorldError", "validate_params"]
