"""Multipath tracing: line of sight plus specular reflections.

Reflected paths come from the image method. For an ordered reflector
sequence the transmitter is mirrored across each plane in turn, the
receiver back-traces through the images to recover the reflection points,
and the path survives only if every reflection point falls inside its
polygon and every segment is unoccluded. Candidate sequences are pruned
when a mirrored image falls behind the next reflector plane, which cannot
discard a valid path for one-sided reflectors; pruning is covered by an
exhaustive-enumeration oracle in the tests.

Polarization: the transmitter radiates vertical linear polarization, the
receiver projects onto the same polarization, and antennas are isotropic.
The field is carried along the path as a complex 3-vector, split into
TE/TM components at each reflection relative to the local plane of
incidence. Free-space spreading uses the total unfolded path length.
"""

from dataclasses import dataclass
import cmath
import math

import numpy as np

from ..constants import (
    DEFAULT_MAX_PATHS,
    DUPLICATE_PATH_TOL,
    MAX_REFLECTION_ORDER_CAP,
    PLANE_SIDE_EPS,
    RAY_EPSILON,
    SPEED_OF_LIGHT,
)
from ..materials import Material
from .bvh import AccelIndex
from .fresnel import TE, TM, fresnel_reflection
from .reflectors import ReflectorSet, build_reflectors


@dataclass(frozen=True)
class RTConfig:
    """Tracer configuration.

    ``polarization`` is fixed vertical linear at the transmitter; the
    field exists so datasets record the convention explicitly.
    """

    frequency: float = 28e9
    max_reflection_order: int = 2
    max_paths: int = DEFAULT_MAX_PATHS
    polarization: str = "vertical"

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if not 0 <= self.max_reflection_order <= MAX_REFLECTION_ORDER_CAP:
            raise ValueError(
                f"max_reflection_order must be in [0, {MAX_REFLECTION_ORDER_CAP}], "
                f"got {self.max_reflection_order}"
            )
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency


@dataclass(frozen=True)
class PropagationPath:
    """One resolved ray path from transmitter to receiver."""

    vertices: np.ndarray                 # (k + 2, 3): tx, reflections..., rx
    interactions: list                   # [(reflector_index, material_id)]
    length: float
    delay: float                         # length / c
    gain: complex                        # linear field amplitude
    gain_db: float                       # 20 log10 |gain|
    aod: tuple[float, float]             # (azimuth, elevation) at tx, rad
    aoa: tuple[float, float]             # (azimuth, elevation) at rx, rad
    reflection_count: int


@dataclass(frozen=True)
class ChannelResult:
    """All paths of one (tx, rx) link plus power aggregates."""

    tx_id: str
    rx_id: str
    paths: list[PropagationPath]
    total_power_noncoherent_db: float
    total_power_coherent_db: float
    los_blocked: bool


class SceneIndex:
    """Acceleration structures for one composed scene.

    Bundles the face BVH, the merged reflector set, and the resolved
    material table. Immutable; safe to share across tracing workers.
    """

    def __init__(self, vertices: np.ndarray, materials: list[str],
                 material_table: dict[str, Material],
                 tx_sites: dict[str, np.ndarray], rx_sites: dict[str, np.ndarray]):
        self.bvh = AccelIndex(vertices)
        self.face_materials = list(materials)
        self.reflectors = build_reflectors(vertices, materials) if len(vertices) else ReflectorSet([])
        self.material_table = material_table
        self.tx_sites = tx_sites
        self.rx_sites = rx_sites

    @property
    def face_count(self) -> int:
        return self.bvh.face_count


def build_index(scene) -> SceneIndex:
    """Flatten a composed Scene into a SceneIndex ready for tracing."""
    vertices, materials, _ = scene.build_arrays()
    tx = {site_id: pos.as_array() for site_id, pos in scene.tx_positions}
    rx = {site_id: pos.as_array() for site_id, pos in scene.rx_positions}
    return SceneIndex(vertices, materials, scene.material_table, tx, rx)


# --- geometry helpers -------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _angles(direction: np.ndarray) -> tuple[float, float]:
    """(azimuth, elevation) of a unit direction, radians."""
    az = math.atan2(direction[1], direction[0])
    el = math.atan2(direction[2], math.hypot(direction[0], direction[1]))
    return az, el


def _vertical_pol(direction: np.ndarray) -> np.ndarray:
    """Vertical linear polarization vector for a propagation direction.

    The projection of world +z onto the plane transverse to the ray. For
    near-vertical rays the projection degenerates; world +x (projected) is
    used instead, documented as the convention for zenith paths.
    """
    w = np.array([0.0, 0.0, 1.0]) - direction[2] * direction
    norm = np.linalg.norm(w)
    if norm < 1e-9:
        w = np.array([1.0, 0.0, 0.0]) - direction[0] * direction
        norm = np.linalg.norm(w)
    return w / norm


def _perp_fallback(direction: np.ndarray) -> np.ndarray:
    axis = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    return _unit(axis - (axis @ direction) * direction)


def _segment_clear(bvh: AccelIndex, a: np.ndarray, b: np.ndarray) -> bool:
    """True when the open segment (a, b) is free of scene faces.

    Hits within RAY_EPSILON of either endpoint are ignored, which is what
    lets a segment start and end on its own reflectors.
    """
    diff = b - a
    dist = np.linalg.norm(diff)
    if dist <= 2.0 * RAY_EPSILON:
        return False
    return not bvh.any_hit(a, diff / dist, RAY_EPSILON, dist - RAY_EPSILON)


# --- path gain ---------------------------------------------------------------


def path_gain(vertices: np.ndarray, interactions: list, config: RTConfig,
              material_table: dict[str, Material],
              normals: list[np.ndarray]) -> complex:
    """Complex amplitude of a path with the stated polarization handling.

    ``vertices`` is the full chain including endpoints; ``interactions``
    and ``normals`` describe the reflections in order. The amplitude is
    ``lambda / (4 pi L)`` on the unfolded length, times the projected
    product of Fresnel coefficients, times the propagation phase
    ``exp(-j 2 pi L / lambda)``.
    """
    lam = config.wavelength
    segments = np.diff(vertices, axis=0)
    seg_len = np.linalg.norm(segments, axis=1)
    total = float(seg_len.sum())
    directions = segments / seg_len[:, None]

    field = _vertical_pol(directions[0]).astype(complex)
    for i, (_, material_id) in enumerate(interactions):
        k_in = directions[i]
        normal = normals[i]
        cos_inc = float(np.clip(-(k_in @ normal), 0.0, 1.0))
        material = material_table[material_id]
        g_te = fresnel_reflection(material, cos_inc, config.frequency, TE)
        g_tm = fresnel_reflection(material, cos_inc, config.frequency, TM)
        e_perp = np.cross(k_in, normal)
        norm = np.linalg.norm(e_perp)
        e_perp = e_perp / norm if norm > 1e-9 else _perp_fallback(k_in)
        k_out = directions[i + 1]
        e_par_in = np.cross(e_perp, k_in)
        e_par_out = np.cross(e_perp, k_out)
        field = g_te * (field @ e_perp) * e_perp + g_tm * (field @ e_par_in) * e_par_out

    projected = complex(field @ _vertical_pol(directions[-1]))
    spreading = lam / (4.0 * math.pi * total)
    return spreading * projected * cmath.exp(-2j * math.pi * total / lam)


def _finish_path(vertices_list: list[np.ndarray], seq: list[int], index: SceneIndex,
                 config: RTConfig) -> PropagationPath:
    vertices = np.stack(vertices_list)
    rset = index.reflectors
    interactions = [(r, rset.reflectors[r].material_id) for r in seq]
    normals = [rset.reflectors[r].normal for r in seq]
    gain = path_gain(vertices, interactions, config, index.material_table, normals)
    segments = np.diff(vertices, axis=0)
    length = float(np.linalg.norm(segments, axis=1).sum())
    mag = abs(gain)
    out_dir = _unit(segments[0])
    in_dir = _unit(vertices[-2] - vertices[-1])
    return PropagationPath(
        vertices=vertices,
        interactions=interactions,
        length=length,
        delay=length / SPEED_OF_LIGHT,
        gain=gain,
        gain_db=20.0 * math.log10(mag) if mag > 0.0 else -math.inf,
        aod=_angles(out_dir),
        aoa=_angles(in_dir),
        reflection_count=len(seq),
    )


# --- line of sight -----------------------------------------------------------


def los_path(tx: np.ndarray, rx: np.ndarray, index: SceneIndex,
             config: RTConfig) -> PropagationPath | None:
    """The unoccluded direct path, or None when blocked."""
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if np.array_equal(tx, rx):
        raise ValueError("tx and rx must be distinct points")
    if not _segment_clear(index.bvh, tx, rx):
        return None
    return _finish_path([tx, rx], [], index, config)


# --- image method ------------------------------------------------------------


def image_method_paths(tx: np.ndarray, rx: np.ndarray, index: SceneIndex,
                       config: RTConfig) -> list[PropagationPath]:
    """All specular reflection paths up to the configured order.

    Enumerates ordered reflector sequences depth-first, carrying the
    mirrored transmitter image; the last level of every order is evaluated
    vectorized across all reflectors. Geometrically duplicate paths
    (vertex chains within DUPLICATE_PATH_TOL) are emitted once.
    """
    rset = index.reflectors
    n_ref = len(rset)
    if config.max_reflection_order < 1 or n_ref == 0:
        return []
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)

    f_rx = rset.signed_distance(rx)
    rx_front = f_rx > PLANE_SIDE_EPS
    raw: list[tuple[list[np.ndarray], list[int]]] = []

    def last_level(prefix: list[int], images: list[np.ndarray]) -> None:
        """Vectorized final reflector choice for sequences prefix + [r]."""
        image = images[-1]
        f_img = rset.signed_distance(image)
        mask = (f_img > PLANE_SIDE_EPS) & rx_front
        if prefix:
            mask &= ~rset.same_plane[prefix[-1]]
        if not np.any(mask):
            return
        mirrored = rset.mirror(image)
        s = np.where(mask, f_rx / np.where(mask, f_rx + f_img, 1.0), 0.0)
        points = rx[None, :] + s[:, None] * (mirrored - rx[None, :])
        mask &= rset.contains_own(points)
        for r in np.nonzero(mask)[0]:
            _validate(prefix + [int(r)], images, points[r])

    def _validate(seq: list[int], images: list[np.ndarray], last_point: np.ndarray) -> None:
        """Back-trace the remaining reflections and run occlusion checks."""
        chain = [rx, last_point]
        cur = last_point
        for j in range(len(seq) - 2, -1, -1):
            r = seq[j]
            f_cur = float(rset.normals[r] @ cur - rset.offsets[r])
            f_prev = float(rset.normals[r] @ images[j] - rset.offsets[r])
            if f_cur <= PLANE_SIDE_EPS or f_prev <= PLANE_SIDE_EPS:
                return
            # The virtual source of the segment ending at cur is images[j]
            # mirrored across reflector r.
            virtual = images[j] - 2.0 * f_prev * rset.normals[r]
            s = f_cur / (f_cur + f_prev)
            point = cur + s * (virtual - cur)
            if not bool(rset.contains_one(r, point[None, :])[0]):
                return
            chain.append(point)
            cur = point
        chain.append(tx)
        chain.reverse()
        for a, b in zip(chain[:-1], chain[1:]):
            if not _segment_clear(index.bvh, a, b):
                return
        raw.append((chain, seq))

    def dfs(prefix: list[int], images: list[np.ndarray], depth_left: int) -> None:
        last_level(prefix, images)
        if depth_left <= 1:
            return
        image = images[-1]
        f_img = rset.signed_distance(image)
        allowed = f_img > PLANE_SIDE_EPS
        if prefix:
            allowed &= ~rset.same_plane[prefix[-1]]
        for r in np.nonzero(allowed)[0]:
            mirrored = image - 2.0 * f_img[r] * rset.normals[r]
            dfs(prefix + [int(r)], images + [mirrored], depth_left - 1)

    dfs([], [tx], config.max_reflection_order)

    paths: list[PropagationPath] = []
    kept: list[np.ndarray] = []
    for chain, seq in raw:
        arr = np.stack(chain)
        duplicate = False
        for other in kept:
            if other.shape == arr.shape and np.max(np.abs(other - arr)) < DUPLICATE_PATH_TOL:
                duplicate = True
                break
        if duplicate:
            continue
        kept.append(arr)
        paths.append(_finish_path(chain, seq, index, config))
    return paths


# --- channel -----------------------------------------------------------------


def trace_channel(scene, tx_id: str, rx_id: str, config: RTConfig,
                  index: SceneIndex | None = None) -> ChannelResult:
    """Trace one link: LOS plus reflections, sorted strongest first.

    Pure given (scene, config); safe to evaluate concurrently across links
    and scenes. Pass a prebuilt ``index`` to amortize acceleration-
    structure construction across the links of one scene.
    """
    if index is None:
        index = build_index(scene)
    if tx_id not in index.tx_sites:
        raise KeyError(f"unknown tx id {tx_id!r}")
    if rx_id not in index.rx_sites:
        raise KeyError(f"unknown rx id {rx_id!r}")
    tx = index.tx_sites[tx_id]
    rx = index.rx_sites[rx_id]

    los = los_path(tx, rx, index, config)
    paths = [] if los is None else [los]
    if config.max_reflection_order >= 1:
        paths.extend(image_method_paths(tx, rx, index, config))
    paths.sort(key=lambda p: (-abs(p.gain), p.length, p.reflection_count))
    paths = paths[: config.max_paths]

    if paths:
        amps = np.array([p.gain for p in paths])
        power = float(np.sum(np.abs(amps) ** 2))
        coherent = abs(complex(np.sum(amps)))
        noncoh_db = 10.0 * math.log10(power) if power > 0 else -math.inf
        coh_db = 20.0 * math.log10(coherent) if coherent > 0 else -math.inf
    else:
        noncoh_db = -math.inf
        coh_db = -math.inf
    return ChannelResult(
        tx_id=tx_id,
        rx_id=rx_id,
        paths=paths,
        total_power_noncoherent_db=noncoh_db,
        total_power_coherent_db=coh_db,
        los_blocked=los is None,
    )
