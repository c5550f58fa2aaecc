"""Multiagent shared-space traffic simulation: path planning, social forces and
leader-follower games between pedestrians and cars."""
