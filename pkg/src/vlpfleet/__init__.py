"""Multi-robot navigation testbed: LED visible-light positioning, odometry
fusion, LiDAR arena simulation, and a fleet host with an operator console."""

__version__ = "0.1.0"
