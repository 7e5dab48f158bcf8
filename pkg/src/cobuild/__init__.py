"""Collaborative house-building teaming testbed with replayable missions.

Core layers: a deterministic tick simulation (``world``), an A* planner
(``pathfinding``), a length-prefixed JSON wire protocol (``protocol``), two AI
agents (``agents``), event-based mission logging (``mission_log``), replay and
frame rendering (``replay``, ``rendering``), and an after-action review HTTP
service (``aae``).  ``cobuild.cli`` ties them together.
"""

__version__ = "0.1.0"
