"""Independent reference implementations used to check the tracer.

Everything here is deliberately written from scratch against the same
physical conventions (one-sided faces, image-method reflections) without
importing tracer internals: exhaustive sequence enumeration instead of
pruned search, per-triangle tests instead of merged polygons, and a
straight scan over all faces instead of the BVH.
"""

import math

import numpy as np

C = 299792458.0


def ray_hits_triangle(origin, direction, tri, t_lo, t_hi):
    """Segment-triangle test via plane intersection plus barycentric check."""
    a, b, c = tri
    n = np.cross(b - a, c - a)
    denom = float(n @ direction)
    if abs(denom) < 1e-14:
        return False
    t = float(n @ (a - origin)) / denom
    if not (t_lo < t < t_hi):
        return False
    p = origin + t * direction
    # Barycentric via normal-projected areas.
    area2 = float(n @ n)
    w_a = float(n @ np.cross(c - b, p - b)) / area2
    w_b = float(n @ np.cross(a - c, p - c)) / area2
    w_c = 1.0 - w_a - w_b
    eps = -1e-10
    return w_a >= eps and w_b >= eps and w_c >= eps


def segment_blocked(a, b, faces, endpoint_eps=1e-6):
    """Any face crossing the open segment (a, b), endpoint neighborhoods excluded."""
    diff = b - a
    dist = float(np.linalg.norm(diff))
    direction = diff / dist
    for tri in faces:
        if ray_hits_triangle(a, direction, tri, endpoint_eps, dist - endpoint_eps):
            return True
    return False


def point_in_triangle(p, tri, tol=1e-9):
    a, b, c = tri
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    n = n / norm
    if abs(float(n @ (p - a))) > 1e-7:
        return False
    for u, v in ((a, b), (b, c), (c, a)):
        edge = v - u
        inward = np.cross(n, edge)
        inward = inward / np.linalg.norm(inward)
        if float((p - u) @ inward) < -tol:
            return False
    return True


def brute_force_paths(tx, rx, faces, max_order):
    """Exhaustive image-method enumeration over ordered triangle sequences.

    Faces are one-sided: a reflection is valid only when the incident
    segment arrives against the face normal (winding order defines it).
    Returns deduplicated vertex chains (lists of (k+2, 3) arrays).
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    faces = [np.asarray(f, dtype=float) for f in faces]
    normals = []
    for tri in faces:
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        normals.append(n / np.linalg.norm(n))

    chains = []
    n_faces = len(faces)

    def mirror(point, face_idx):
        n = normals[face_idx]
        d = float(n @ (point - faces[face_idx][0]))
        return point - 2.0 * d * n

    def try_sequence(seq):
        images = [tx]
        for fi in seq:
            images.append(mirror(images[-1], fi))
        # Back-trace from the receiver.
        points = [rx]
        for j in range(len(seq) - 1, -1, -1):
            fi = seq[j]
            n = normals[fi]
            anchor = faces[fi][0]
            cur = points[-1]
            virt = images[j + 1]
            denom = float(n @ (virt - cur))
            if abs(denom) < 1e-14:
                return None
            s = float(n @ (anchor - cur)) / denom
            if not (1e-12 < s < 1.0 - 1e-12):
                return None
            p = cur + s * (virt - cur)
            if not point_in_triangle(p, faces[fi]):
                return None
            points.append(p)
        chain = points[::-1]
        chain.insert(0, tx)
        # One-sided rule: each segment must arrive against the face normal.
        for j, fi in enumerate(seq):
            seg = chain[j + 1] - chain[j]
            norm = np.linalg.norm(seg)
            if norm < 1e-9:
                return None
            if float(seg / norm @ normals[fi]) >= 0.0:
                return None
        for a, b in zip(chain[:-1], chain[1:]):
            if np.linalg.norm(b - a) < 2e-6:
                return None
            if segment_blocked(a, b, faces):
                return None
        return np.stack(chain)

    def all_sequences(prefix, order):
        if order == 0:
            yield prefix
            return
        for fi in range(n_faces):
            yield from all_sequences(prefix + [fi], order - 1)

    for order in range(1, max_order + 1):
        for seq in all_sequences([], order):
            chain = try_sequence(seq)
            if chain is not None:
                chains.append(chain)

    deduped = []
    for chain in chains:
        if not any(c.shape == chain.shape and np.max(np.abs(c - chain)) < 1e-6 for c in deduped):
            deduped.append(chain)
    return deduped


def chains_match(a_chains, b_chains, tol=1e-6):
    """Set equality of vertex chains under pairwise distance matching."""
    if len(a_chains) != len(b_chains):
        return False
    used = set()
    for a in a_chains:
        found = False
        for i, b in enumerate(b_chains):
            if i in used or a.shape != b.shape:
                continue
            if np.max(np.abs(a - b)) < tol:
                used.add(i)
                found = True
                break
        if not found:
            return False
    return True


def friis_gain_db(distance, frequency):
    """Closed-form free-space amplitude gain in dB: 20 log10(lambda / 4 pi d)."""
    lam = C / frequency
    return 20.0 * math.log10(lam / (4.0 * math.pi * distance))


def normal_incidence_reflection(eps_r):
    """|reflection| of a lossless dielectric at normal incidence."""
    n = math.sqrt(eps_r)
    return (n - 1.0) / (n + 1.0)
