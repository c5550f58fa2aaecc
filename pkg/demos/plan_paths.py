"""
Planning paths around obstacles
===============================

Road users walk or drive along the shortest polyline between their origin and
destination. The polyline runs through corners of the obstacle outlines, and
each inner corner is then pushed outward so that nobody scrapes a wall.
"""
import numpy as np

from sharedspace.environment import ObstaclePolygon, build_visibility_graph, offset_inner_vertices, plan_path

# two planters and a kiosk on a small square
obstacles = [
    ObstaclePolygon("planter_w", [[-6, -2], [-3, -2], [-3, 2], [-6, 2]]),
    ObstaclePolygon("planter_e", [[3, -4], [6, -4], [6, 0], [3, 0]]),
    ObstaclePolygon("kiosk", [[-1, 3], [1, 3], [0, 5]]),
]

# the graph over all outline corners is built once per map
graph = build_visibility_graph(obstacles)
print(f"{len(graph.nodes)} corners, {len(graph.edges)} mutually visible pairs")

# A* with a straight-line heuristic between any two free points
path = plan_path(graph, (-10, 0), (10, -1))
print("shortest path:", np.round(path.waypoints, 2).tolist(), f"length {path.total_length:.3f} m")

# keep 0.5 m away from the corners a pedestrian would otherwise touch
safe = offset_inner_vertices(path, obstacles, clearance=0.5)
print("with clearance:", np.round(safe.waypoints, 2).tolist(), f"length {safe.total_length:.3f} m")
for wp in safe.waypoints[1:-1]:
    print(f"  waypoint {np.round(wp, 2)} is {min(o.distance(wp) for o in obstacles):.2f} m from the nearest outline")
