"""Numeric constants shared across the package.

All geometric tolerances are in meters unless noted. These are the single
source of truth; modules import from here rather than redefining values.
"""

#: Speed of light in vacuum, m/s (exact, SI definition).
SPEED_OF_LIGHT = 299792458.0

#: Vacuum permittivity, F/m (CODATA 2018).
VACUUM_PERMITTIVITY = 8.8541878128e-12

#: Minimum ray-hit distance; hits closer than this to the ray origin are
#: treated as self-intersections and ignored.
RAY_EPSILON = 1e-6

#: Two propagation paths whose vertex chains differ by less than this at
#: every vertex are considered the same path and emitted once.
DUPLICATE_PATH_TOL = 1e-6

#: Reflection points within this distance of a reflector polygon edge still
#: count as inside the polygon.
POLYGON_EDGE_TOL = 1e-9

#: Minimum signed distance from a reflector plane for a point to count as
#: lying on the reflecting (front) side.
PLANE_SIDE_EPS = 1e-9

#: Faces with area below this are rejected as degenerate, m^2.
MIN_FACE_AREA = 1e-12

#: Hard cap on the specular reflection order (combinatorial growth).
MAX_REFLECTION_ORDER_CAP = 3

#: Default cap on the number of paths kept per link.
DEFAULT_MAX_PATHS = 25

#: Default minimum bumper-to-bumper gap enforced by the car-following
#: model, meters of arc length.
DEFAULT_GAP_MIN = 2.5
