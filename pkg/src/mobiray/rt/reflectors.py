"""Planar reflector extraction for the image method.

Adjacent coplanar triangles with the same material are merged into convex
polygons so the image method enumerates surfaces (a wall, a roof) rather
than the individual triangles that tile them. A merged component whose
union is not convex falls back to per-triangle reflectors, which keeps
results correct for arbitrary input meshes; duplicate-path removal in the
tracer collapses any overlap either way.

Reflectors are one-sided: their orientation comes from the winding of the
source triangles, and only rays arriving against the normal reflect.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..constants import POLYGON_EDGE_TOL


@dataclass(frozen=True)
class Reflector:
    """One convex planar polygon usable as a specular reflector."""

    index: int
    material_id: str
    normal: np.ndarray      # unit, orientation from face winding
    offset: float           # plane equation: normal . x = offset
    vertices: np.ndarray    # (m, 3), counter-clockwise around the normal
    face_indices: tuple     # scene face indices composing this reflector


class ReflectorSet:
    """Reflectors of one scene plus padded arrays for vectorized queries."""

    def __init__(self, reflectors: list[Reflector]):
        self.reflectors = reflectors
        r = len(reflectors)
        self.normals = np.zeros((r, 3))
        self.offsets = np.zeros(r)
        max_edges = max((len(ref.vertices) for ref in reflectors), default=3)
        self.edge_anchor = np.zeros((r, max_edges, 3))
        self.edge_inward = np.zeros((r, max_edges, 3))
        self.edge_mask = np.zeros((r, max_edges), dtype=bool)
        for i, ref in enumerate(reflectors):
            self.normals[i] = ref.normal
            self.offsets[i] = ref.offset
            verts = ref.vertices
            m = len(verts)
            for e in range(m):
                a, b = verts[e], verts[(e + 1) % m]
                edge = b - a
                inward = np.cross(ref.normal, edge)
                self.edge_anchor[i, e] = a
                self.edge_inward[i, e] = inward / np.linalg.norm(inward)
            self.edge_mask[i, :m] = True
        # same_plane[i, j]: reflectors share a geometric plane (either
        # orientation); consecutive same-plane reflections are degenerate.
        if r:
            anchors = np.array([ref.vertices[0] for ref in reflectors])
            ndots = np.abs(self.normals @ self.normals.T)
            plane_dist = np.abs(self.normals @ anchors.T - self.offsets[:, None])
            self.same_plane = (ndots > 1.0 - 1e-9) & (plane_dist < 1e-9)
        else:
            self.same_plane = np.zeros((0, 0), dtype=bool)

    def __len__(self) -> int:
        return len(self.reflectors)

    def signed_distance(self, point: np.ndarray) -> np.ndarray:
        """Signed distance from ``point`` to every reflector plane."""
        return self.normals @ np.asarray(point, dtype=float) - self.offsets

    def mirror(self, point: np.ndarray) -> np.ndarray:
        """Mirror ``point`` across every reflector plane; (r, 3)."""
        d = self.signed_distance(point)
        return np.asarray(point, dtype=float)[None, :] - 2.0 * d[:, None] * self.normals

    def contains_own(self, points: np.ndarray, tol: float = POLYGON_EDGE_TOL) -> np.ndarray:
        """Row-wise containment: does reflector i contain points[i]?"""
        rel = points[:, None, :] - self.edge_anchor
        dist = np.einsum("rej,rej->re", rel, self.edge_inward)
        return np.all((dist >= -tol) | ~self.edge_mask, axis=1)

    def contains_one(self, index: int, points: np.ndarray,
                     tol: float = POLYGON_EDGE_TOL) -> np.ndarray:
        """Containment of many points in one reflector polygon."""
        mask = self.edge_mask[index]
        rel = points[:, None, :] - self.edge_anchor[index][None, :, :]
        dist = np.einsum("pej,ej->pe", rel, self.edge_inward[index])
        return np.all((dist >= -tol) | ~mask[None, :], axis=1)


def _plane_key(normal: np.ndarray, offset: float) -> tuple:
    return (round(normal[0], 7), round(normal[1], 7), round(normal[2], 7), round(offset, 6))


def _vertex_key(v: np.ndarray) -> tuple:
    return (round(v[0], 9), round(v[1], 9), round(v[2], 9))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def build_reflectors(vertices: np.ndarray, materials: list[str]) -> ReflectorSet:
    """Merge the face array into a ReflectorSet.

    ``vertices`` is the scene face array (n, 3, 3); ``materials`` the
    parallel material-name list.
    """
    vertices = np.asarray(vertices, dtype=float)
    n = vertices.shape[0]
    e1 = vertices[:, 1] - vertices[:, 0]
    e2 = vertices[:, 2] - vertices[:, 0]
    raw_normals = np.cross(e1, e2)
    areas2 = np.linalg.norm(raw_normals, axis=1)
    normals = raw_normals / areas2[:, None]
    offsets = np.einsum("ij,ij->i", normals, vertices[:, 0])

    groups: dict[tuple, list[int]] = {}
    for i in range(n):
        key = (materials[i], _plane_key(normals[i], offsets[i]))
        groups.setdefault(key, []).append(i)

    reflectors: list[Reflector] = []
    for (material, _), face_ids in groups.items():
        for component in _adjacent_components(vertices, face_ids):
            poly = _merge_component(vertices, normals, component)
            if poly is not None:
                reflectors.append(Reflector(
                    index=len(reflectors), material_id=material,
                    normal=normals[component[0]],
                    offset=float(offsets[component[0]]),
                    vertices=poly, face_indices=tuple(component),
                ))
            else:
                for fid in component:
                    reflectors.append(Reflector(
                        index=len(reflectors), material_id=material,
                        normal=normals[fid], offset=float(offsets[fid]),
                        vertices=vertices[fid].copy(), face_indices=(fid,),
                    ))
    return ReflectorSet(reflectors)


def _adjacent_components(vertices: np.ndarray, face_ids: list[int]) -> list[list[int]]:
    """Split a coplanar same-material group into edge-connected components."""
    uf = _UnionFind(len(face_ids))
    edge_owner: dict[tuple, int] = {}
    for local, fid in enumerate(face_ids):
        tri = vertices[fid]
        keys = [_vertex_key(tri[k]) for k in range(3)]
        for k in range(3):
            edge = tuple(sorted((keys[k], keys[(k + 1) % 3])))
            if edge in edge_owner:
                uf.union(edge_owner[edge], local)
            else:
                edge_owner[edge] = local
    components: dict[int, list[int]] = {}
    for local, fid in enumerate(face_ids):
        components.setdefault(uf.find(local), []).append(fid)
    return [sorted(c) for c in components.values()]


def _merge_component(vertices: np.ndarray, normals: np.ndarray,
                     component: list[int]) -> np.ndarray | None:
    """Convex hull of a coplanar component, or None when the union is not convex."""
    normal = normals[component[0]]
    tris = vertices[component]
    points = tris.reshape(-1, 3)
    unique: dict[tuple, np.ndarray] = {}
    for p in points:
        unique.setdefault(_vertex_key(p), p)
    pts3 = np.array(list(unique.values()))
    if len(pts3) < 3:
        return None
    # In-plane orthonormal basis with u x v = normal, so the hull order is
    # counter-clockwise around the reflector normal.
    u = np.cross(normal, [0.0, 0.0, 1.0])
    if np.linalg.norm(u) < 1e-9:
        u = np.cross(normal, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    pts2 = np.stack([pts3 @ u, pts3 @ v], axis=1)
    if len(component) == 1:
        return vertices[component[0]].copy()
    try:
        hull = ConvexHull(pts2)
    except QhullError:
        return None
    tri_area = 0.5 * float(np.sum(np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)))
    if abs(hull.volume - tri_area) > 1e-9 * max(tri_area, 1.0):
        return None
    ordered = pts3[hull.vertices]
    # Ensure counter-clockwise around the normal (offsets sign of the area).
    area = 0.0
    m = len(ordered)
    flat = np.stack([ordered @ u, ordered @ v], axis=1)
    for i in range(m):
        j = (i + 1) % m
        area += flat[i, 0] * flat[j, 1] - flat[j, 0] * flat[i, 1]
    if area < 0:
        ordered = ordered[::-1].copy()
    return ordered
