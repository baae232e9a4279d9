"""Bounding volume hierarchy over scene triangles.

The index answers two queries: nearest hit along a ray (beyond a
self-intersection epsilon) and any-hit within a parametric window, the
latter used for occlusion tests. Both the accelerated and the brute-force
paths evaluate the same vectorized Moller-Trumbore routine, so an
accelerated query returns bit-identical results to scanning every face,
including the tie rule that an equal-distance hit resolves to the lower
face index.
"""

import numpy as np

from ..constants import RAY_EPSILON

_LEAF_SIZE = 4
_MT_EPS = 1e-12


class AccelIndex:
    """Immutable BVH over a face array of shape (n, 3, 3)."""

    def __init__(self, vertices: np.ndarray):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 3 or vertices.shape[1:] != (3, 3):
            raise ValueError(f"expected (n, 3, 3) face vertices, got {vertices.shape}")
        self.vertices = vertices
        self.v0 = vertices[:, 0]
        self.e1 = vertices[:, 1] - vertices[:, 0]
        self.e2 = vertices[:, 2] - vertices[:, 0]
        n = vertices.shape[0]
        face_min = vertices.min(axis=1)
        face_max = vertices.max(axis=1)
        centroids = vertices.mean(axis=1)

        # Build via median split on the longest centroid axis; leaves store
        # ranges into a permuted face-index array.
        perm = np.arange(n)
        nodes: list[dict] = []

        def build(lo: int, hi: int) -> int:
            idx = len(nodes)
            sub = perm[lo:hi]
            nodes.append({
                "min": face_min[sub].min(axis=0),
                "max": face_max[sub].max(axis=0),
                "left": -1, "right": -1, "start": lo, "count": hi - lo,
            })
            if hi - lo > _LEAF_SIZE:
                cmin = centroids[sub].min(axis=0)
                cmax = centroids[sub].max(axis=0)
                axis = int(np.argmax(cmax - cmin))
                if cmax[axis] - cmin[axis] > 0:
                    keys = centroids[sub][:, axis]
                    local = np.argsort(keys, kind="stable")
                    perm[lo:hi] = sub[local]
                    mid = lo + (hi - lo) // 2
                    nodes[idx]["left"] = build(lo, mid)
                    nodes[idx]["right"] = build(mid, hi)
                    nodes[idx]["count"] = 0
            return idx

        if n:
            build(0, n)

        self.perm = perm
        self.node_min = np.array([nd["min"] for nd in nodes]) if nodes else np.zeros((0, 3))
        self.node_max = np.array([nd["max"] for nd in nodes]) if nodes else np.zeros((0, 3))
        self.node_left = np.array([nd["left"] for nd in nodes], dtype=int) if nodes else np.zeros(0, int)
        self.node_right = np.array([nd["right"] for nd in nodes], dtype=int) if nodes else np.zeros(0, int)
        self.node_start = np.array([nd["start"] for nd in nodes], dtype=int) if nodes else np.zeros(0, int)
        self.node_count = np.array([nd["count"] for nd in nodes], dtype=int) if nodes else np.zeros(0, int)

    @property
    def face_count(self) -> int:
        return self.vertices.shape[0]

    # -- queries ------------------------------------------------------------

    def _leaf_hits(self, node: int, origin, direction):
        start = self.node_start[node]
        sub = self.perm[start:start + self.node_count[node]]
        t, valid = _moller_trumbore(origin, direction, self.v0[sub], self.e1[sub], self.e2[sub])
        return sub, t, valid

    def nearest(self, origin, direction, t_min: float = RAY_EPSILON):
        """Nearest (face_index, t) hit with t > t_min, or None.

        ``direction`` must be unit length for ``t`` to be in meters. Ties in
        t resolve to the smaller face index, matching ``intersect_brute``.
        """
        if not len(self.node_min):
            return None
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        inv = _safe_inverse(direction)
        best_t = np.inf
        best_face = -1
        stack = [0]
        while stack:
            node = stack.pop()
            entry, exit_ = _slab(origin, inv, self.node_min[node], self.node_max[node])
            if entry > exit_ or exit_ < t_min or entry > best_t:
                continue
            left = self.node_left[node]
            if left < 0:
                sub, t, valid = self._leaf_hits(node, origin, direction)
                valid &= t > t_min
                for i in np.nonzero(valid)[0]:
                    ti, fi = t[i], int(sub[i])
                    if ti < best_t or (ti == best_t and fi < best_face):
                        best_t, best_face = ti, fi
                continue
            stack.append(int(self.node_right[node]))
            stack.append(int(left))
        if best_face < 0:
            return None
        return best_face, float(best_t)

    def any_hit(self, origin, direction, t_min: float, t_max: float) -> bool:
        """True when any face intersects with t strictly inside (t_min, t_max)."""
        if not len(self.node_min):
            return False
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        inv = _safe_inverse(direction)
        stack = [0]
        while stack:
            node = stack.pop()
            entry, exit_ = _slab(origin, inv, self.node_min[node], self.node_max[node])
            if entry > exit_ or exit_ < t_min or entry > t_max:
                continue
            left = self.node_left[node]
            if left < 0:
                _, t, valid = self._leaf_hits(node, origin, direction)
                if np.any(valid & (t > t_min) & (t < t_max)):
                    return True
                continue
            stack.append(int(self.node_right[node]))
            stack.append(int(left))
        return False


def _safe_inverse(direction: np.ndarray) -> np.ndarray:
    d = np.where(np.abs(direction) < 1e-300, 1e-300, direction)
    return 1.0 / d


def _slab(origin, inv, box_min, box_max) -> tuple[float, float]:
    t1 = (box_min - origin) * inv
    t2 = (box_max - origin) * inv
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    return float(lo.max()), float(hi.min())


def _moller_trumbore(origin, direction, v0, e1, e2):
    """Vectorized ray-triangle test; returns (t, valid) arrays."""
    pvec = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    valid = np.abs(det) > _MT_EPS
    inv_det = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
    tvec = origin[None, :] - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", direction, qvec) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    valid &= (u >= -_MT_EPS) & (v >= -_MT_EPS) & (u + v <= 1.0 + _MT_EPS)
    return t, valid


def intersect_brute(origin, direction, vertices: np.ndarray, t_min: float = RAY_EPSILON):
    """Reference nearest-hit scanning every face; mirrors AccelIndex.nearest."""
    vertices = np.asarray(vertices, dtype=float)
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if vertices.shape[0] == 0:
        return None
    v0 = vertices[:, 0]
    t, valid = _moller_trumbore(origin, direction, v0,
                                vertices[:, 1] - v0, vertices[:, 2] - v0)
    valid &= t > t_min
    if not np.any(valid):
        return None
    idxs = np.nonzero(valid)[0]
    ts = t[idxs]
    best = ts.min()
    winners = idxs[ts == best]
    return int(winners.min()), float(best)


def intersect(origin, direction, index: AccelIndex):
    """Nearest hit of a ray against the indexed scene.

    Args:
        origin: Ray origin, world meters.
        direction: Ray direction; normalized internally so the returned
            ``t`` is a distance in meters.
        index: Scene acceleration index.

    Returns:
        ``(face_index, t, point)`` for the nearest hit with
        ``t > RAY_EPSILON``, or None on a miss.
    """
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise ValueError("ray direction must be non-zero")
    unit = direction / norm
    hit = index.nearest(np.asarray(origin, dtype=float), unit)
    if hit is None:
        return None
    face, t = hit
    point = np.asarray(origin, dtype=float) + t * unit
    return face, t, point
