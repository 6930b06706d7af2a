"""Collision-free trajectory generation for articulated robots.

Per-link neural signed-distance fields composed through forward kinematics,
a stochastic trajectory optimizer (time-normalized GP prior + MPPI + kernel
updating), and a time-optimal path parameterizer.
"""

__version__ = "0.1.0"

from sdfplan.gp_prior import GpHyper, GpPrior, Trajectory, condition_on_endpoints, sample_trajectories, se_kernel
from sdfplan.robot import JointSpec, LinkPoseSet, RobotModel, forward_kinematics, load_robot, world_to_link

__all__ = [
    "GpHyper",
    "GpPrior",
    "JointSpec",
    "LinkPoseSet",
    "RobotModel",
    "Trajectory",
    "condition_on_endpoints",
    "forward_kinematics",
    "load_robot",
    "sample_trajectories",
    "se_kernel",
    "world_to_link",
]
