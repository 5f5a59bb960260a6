"""Grasp synthesis and certification for a 22-DoF three-finger hand.

Plans grasp configurations that provably satisfy reachability, collision,
wrench-closure, and friction-cone constraints, and certifies them with
quantitative feasibility metrics.
"""

__version__ = "0.1.0"
