"""Triangle meshes: OFF ingest, validation, scaling, and synthetic families.

Meshes are immutable value objects. The only ingest format is ASCII OFF in
the GeomView dialect (``#`` comments, blank lines, optional trailing color
fields on vertex and face lines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CountMismatch,
    DegenerateFace,
    IndexOutOfRange,
    InvalidParams,
    MalformedNumber,
    MissingHeader,
    NonPositiveScale,
    NonTriangleFace,
)

# Faces with area below this fraction of the squared bounding-box diagonal
# produce non-finite cotangent weights downstream and fail validation.
AREA_EPSILON_SCALE = 1e-12


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex positions and triangular faces of a 3D surface.

    Parameters
    ----------
    vertices : ndarray, shape (nv, 3)
        Vertex coordinates, stored as float64.
    faces : ndarray, shape (nf, 3)
        Vertex indices of each triangle.
    name : str
        Identifier carried through descriptors and reports.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = ""

    def __post_init__(self):
        # copy, so freezing never reaches back into a caller's array
        verts = np.array(self.vertices, dtype=np.float64, order="C")
        faces = np.array(self.faces, dtype=np.int64, order="C")
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise InvalidParams(f"vertices must be (nv, 3), got {verts.shape}")
        if faces.size and (faces.ndim != 2 or faces.shape[1] != 3):
            raise InvalidParams(f"faces must be (nf, 3), got {faces.shape}")
        faces = faces.reshape(-1, 3)
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                bad = int(np.argmax((faces < 0) | (faces >= len(verts))))
                raise IndexOutOfRange(
                    f"face {bad // 3} references vertex outside [0, {len(verts)})"
                )
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            if repeated.any():
                raise DegenerateFace(
                    f"face {int(np.argmax(repeated))} repeats a vertex index"
                )
        verts.flags.writeable = False
        faces.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def vertex_count(self):
        return self.vertices.shape[0]

    @property
    def face_count(self):
        return self.faces.shape[0]


@dataclass(frozen=True)
class ValidationSummary:
    """Report produced by :func:`validate_mesh`; purely descriptive."""

    vertex_count: int
    face_count: int
    min_face_area: float
    area_epsilon: float
    degenerate_faces: int
    boundary_edges: int
    nonmanifold_edges: int
    closed: bool


# ---------------------------------------------------------------------------
# OFF parsing and serialization


def _effective_lines(text):
    """Yield (lineno, tokens) for non-blank lines, comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        if cut >= 0:
            raw = raw[:cut]
        tokens = raw.split()
        if tokens:
            yield lineno, tokens


def _parse_int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise MalformedNumber(f"bad {what} {token!r}", line=lineno) from None


def _parse_float(token, lineno):
    try:
        value = float(token)
    except ValueError:
        raise MalformedNumber(f"bad coordinate {token!r}", line=lineno) from None
    if not math.isfinite(value):
        raise MalformedNumber(f"non-finite coordinate {token!r}", line=lineno)
    return value


def parse_off(source, name=""):
    """Parse ASCII OFF text into a :class:`TriangleMesh`.

    Parameters
    ----------
    source : str or file-like
        OFF content. ``#`` comments and blank lines are skipped; trailing
        color fields on vertex/face lines are ignored. The counts may follow
        the ``OFF`` token on the same line.
    name : str
        Name to attach to the mesh.

    Raises
    ------
    MissingHeader, CountMismatch, NonTriangleFace, IndexOutOfRange,
    MalformedNumber
        Each names the offending 1-based line number.
    """
    if hasattr(source, "read"):
        source = source.read()
    lines = _effective_lines(source)
    last_lineno = source.count("\n") + 1

    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise MissingHeader("empty input, expected OFF header", line=1) from None
    if tokens[0] != "OFF":
        raise MissingHeader(f"expected OFF header, got {tokens[0]!r}", line=lineno)
    if len(tokens) == 1:
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise CountMismatch("missing counts line", line=last_lineno) from None
    else:
        tokens = tokens[1:]
    if len(tokens) != 3:
        raise MalformedNumber(
            f"counts line must hold 'nv nf ne', got {len(tokens)} tokens",
            line=lineno,
        )
    nv = _parse_int(tokens[0], lineno, "vertex count")
    nf = _parse_int(tokens[1], lineno, "face count")
    _parse_int(tokens[2], lineno, "edge count")
    if nv < 0 or nf < 0:
        raise MalformedNumber("negative count", line=lineno)

    vertices = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise CountMismatch(
                f"declared {nv} vertices but input ended after {i}",
                line=last_lineno,
            ) from None
        if len(tokens) < 3:
            raise MalformedNumber(
                f"vertex line needs 3 coordinates, got {len(tokens)}", line=lineno
            )
        for axis in range(3):
            vertices[i, axis] = _parse_float(tokens[axis], lineno)

    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise CountMismatch(
                f"declared {nf} faces but input ended after {i}",
                line=last_lineno,
            ) from None
        arity = _parse_int(tokens[0], lineno, "polygon arity")
        if arity != 3:
            raise NonTriangleFace(f"polygon arity {arity}, only 3 supported", line=lineno)
        if len(tokens) < 4:
            raise MalformedNumber(
                f"face line needs 3 indices, got {len(tokens) - 1}", line=lineno
            )
        for corner in range(3):
            idx = _parse_int(tokens[1 + corner], lineno, "vertex index")
            if idx < 0 or idx >= nv:
                raise IndexOutOfRange(
                    f"vertex index {idx} outside [0, {nv})", line=lineno
                )
            faces[i, corner] = idx
        if faces[i, 0] == faces[i, 1] or faces[i, 1] == faces[i, 2] or faces[i, 0] == faces[i, 2]:
            raise DegenerateFace(f"face repeats a vertex index at line {lineno}")

    for lineno, tokens in lines:
        raise CountMismatch(
            f"unexpected extra content after {nf} declared faces", line=lineno
        )

    return TriangleMesh(vertices=vertices, faces=faces, name=name)


def serialize_off(mesh):
    """Serialize to ASCII OFF. Coordinates use shortest round-trip decimal,
    so parse → serialize → parse is bit-exact."""
    out = ["OFF", f"{mesh.vertex_count} {mesh.face_count} 0"]
    for v in mesh.vertices:
        out.append(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        out.append(f"3 {f[0]} {f[1]} {f[2]}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# geometry helpers


def face_areas(mesh):
    """Areas of all triangles, shape (nf,)."""
    v = mesh.vertices
    f = mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return 0.5 * np.linalg.norm(cross, axis=1)


def area_epsilon(mesh):
    """Degeneracy threshold: 1e-12 times the squared bounding-box diagonal."""
    if mesh.vertex_count == 0:
        return 0.0
    extent = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    return AREA_EPSILON_SCALE * float(np.dot(extent, extent))


def _edge_counts(faces):
    """Unique undirected edges and their face-incidence counts."""
    if len(faces) == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    return np.unique(edges, axis=0, return_counts=True)


def edge_count(mesh):
    """Number of distinct undirected edges."""
    return len(_edge_counts(mesh.faces)[0])


def euler_characteristic(mesh):
    """V - E + F; 2 for a topological sphere, 0 for a torus."""
    return mesh.vertex_count - edge_count(mesh) + mesh.face_count


def validate_mesh(mesh):
    """Collect structural statistics without rejecting anything.

    Downstream operations enforce their own preconditions; this report tells
    the caller what they will find: boundary edges (exactly one incident
    face), non-manifold edges (more than two), and faces below the area
    threshold.
    """
    areas = face_areas(mesh)
    eps = area_epsilon(mesh)
    _, counts = _edge_counts(mesh.faces)
    boundary = int((counts == 1).sum())
    return ValidationSummary(
        vertex_count=mesh.vertex_count,
        face_count=mesh.face_count,
        min_face_area=float(areas.min()) if len(areas) else 0.0,
        area_epsilon=eps,
        degenerate_faces=int((areas <= eps).sum()),
        boundary_edges=boundary,
        nonmanifold_edges=int((counts > 2).sum()),
        closed=boundary == 0,
    )


def scale_mesh(mesh, a):
    """Uniformly scale all vertex coordinates by ``a`` (> 0)."""
    if not (a > 0):
        raise NonPositiveScale(f"scale factor must be positive, got {a}")
    return TriangleMesh(vertices=mesh.vertices * float(a), faces=mesh.faces, name=mesh.name)


# ---------------------------------------------------------------------------
# synthetic shape families


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return verts, faces


def _subdivide(verts, faces):
    """One 1-to-4 midpoint subdivision; orientation is preserved."""
    verts = list(map(tuple, verts))
    midpoint = {}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            a, b = verts[i], verts[j]
            verts.append(((a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(verts, dtype=np.float64), np.array(new_faces, dtype=np.int64)


def _unit_icosphere(subdiv):
    verts, faces = _icosahedron()
    for _ in range(subdiv):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return verts, faces


def _torus_grid(major, minor, subdiv):
    nu = 12 * 2**subdiv
    nv = 6 * 2**subdiv
    theta = 2.0 * np.pi * np.arange(nu) / nu
    phi = 2.0 * np.pi * np.arange(nv) / nv
    ring = major + minor * np.cos(phi)[None, :]
    verts = np.empty((nu * nv, 3), dtype=np.float64)
    verts[:, 0] = (ring * np.cos(theta)[:, None]).ravel()
    verts[:, 1] = (ring * np.sin(theta)[:, None]).ravel()
    verts[:, 2] = np.broadcast_to(minor * np.sin(phi)[None, :], (nu, nv)).ravel()

    i = np.repeat(np.arange(nu), nv)
    j = np.tile(np.arange(nv), nu)
    v00 = i * nv + j
    v10 = ((i + 1) % nu) * nv + j
    v01 = i * nv + (j + 1) % nv
    v11 = ((i + 1) % nu) * nv + (j + 1) % nv
    faces = np.concatenate(
        [
            np.stack([v00, v10, v11], axis=1),
            np.stack([v00, v11, v01], axis=1),
        ]
    ).astype(np.int64)
    return verts, faces


def vertex_normals(mesh):
    """Outward vertex normals: mean of incident unit face normals."""
    v = mesh.vertices
    f = mesh.faces
    fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    norms = np.linalg.norm(fn, axis=1, keepdims=True)
    fn = fn / np.where(norms > 0, norms, 1.0)
    acc = np.zeros_like(v)
    counts = np.zeros(len(v))
    for corner in range(3):
        np.add.at(acc, f[:, corner], fn)
        np.add.at(counts, f[:, corner], 1.0)
    acc /= np.where(counts > 0, counts, 1.0)[:, None]
    norms = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.where(norms > 0, norms, 1.0)


def generate_shape(family, params=(), subdiv=0, noise=0.0, seed=0, name=None):
    """Synthesize a closed, consistently oriented triangle mesh.

    Parameters
    ----------
    family : {'icosphere', 'ellipsoid', 'torus'}
        Shape family. ``icosphere`` takes an optional radius (default 1);
        ``ellipsoid`` takes semi-axes (a, b, c); ``torus`` takes
        (majorRadius, minorRadius) with major > minor > 0.
    subdiv : int
        Refinement level in [0, 6]. Spheres/ellipsoids subdivide the
        icosahedron 1-to-4 per level; the torus uses a (12·2^s) x (6·2^s)
        angular grid.
    noise : float
        Standard deviation of a zero-mean displacement applied along vertex
        normals, drawn from a generator seeded by ``seed``. Keeps the mesh
        closed at small amplitudes.
    seed : int
        Seed for the noise generator; same inputs give an identical mesh.
    name : str, optional
        Mesh name; a descriptive one is derived when omitted.
    """
    if not isinstance(subdiv, (int, np.integer)) or not 0 <= subdiv <= 6:
        raise InvalidParams(f"subdiv must be an integer in [0, 6], got {subdiv!r}")
    noise = float(noise)
    if noise < 0:
        raise InvalidParams(f"noise must be nonnegative, got {noise}")
    params = tuple(float(p) for p in params)

    if family == "icosphere":
        if len(params) not in (0, 1):
            raise InvalidParams("icosphere takes at most one parameter (radius)")
        radius = params[0] if params else 1.0
        if radius <= 0:
            raise InvalidParams(f"radius must be positive, got {radius}")
        verts, faces = _unit_icosphere(subdiv)
        verts = verts * radius
    elif family == "ellipsoid":
        if len(params) != 3 or min(params) <= 0:
            raise InvalidParams(f"ellipsoid needs positive semi-axes (a, b, c), got {params}")
        verts, faces = _unit_icosphere(subdiv)
        verts = verts * np.asarray(params)
    elif family == "torus":
        if len(params) != 2 or not params[0] > params[1] > 0:
            raise InvalidParams(
                f"torus needs (major, minor) with major > minor > 0, got {params}"
            )
        verts, faces = _torus_grid(params[0], params[1], subdiv)
    else:
        raise InvalidParams(f"unknown family {family!r}")

    mesh = TriangleMesh(vertices=verts, faces=faces, name="")
    if noise > 0:
        rng = np.random.default_rng(seed)
        offsets = rng.normal(0.0, noise, mesh.vertex_count)
        verts = mesh.vertices + offsets[:, None] * vertex_normals(mesh)
    if name is None:
        ptxt = ",".join(repr(p) for p in params)
        name = f"{family}({ptxt})_s{subdiv}_n{noise!r}_seed{seed}"
    return TriangleMesh(vertices=verts, faces=faces, name=name)
