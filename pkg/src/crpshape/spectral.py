"""Laplace–Beltrami operator assembly, eigendecomposition, and descriptors.

The discretization is the cotangent stiffness matrix with barycentric lumped
mass: for an edge (i, j) the off-diagonal stiffness entry is
``-(cot(alpha) + cot(beta)) / 2`` over the one or two incident triangles,
the diagonal is the negated off-diagonal row sum (positive semi-definite
convention), and the mass diagonal holds one third of the incident face
areas. Cotangents are invariant under uniform scaling while areas scale by
``a**2``, so eigenvalues scale exactly by ``1/a**2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from . import mesh as mesh_mod
from .errors import (
    ConvergenceFailure,
    DegenerateFace,
    EmptyMesh,
    InsufficientEigenvalues,
    KTooLarge,
    NonClosedMesh,
    ZeroDescriptor,
)

# Largest vertex count solved by direct dense reduction; beyond it the
# shift-invert Lanczos path takes over.
DENSE_CUTOFF = 2000

# An eigenvalue is classified as zero below 1e-8 times the largest computed
# eigenvalue (scale-invariant, like the descriptors), with an absolute floor.
ZERO_THRESHOLD_REL = 1e-8
ZERO_THRESHOLD_ABS = 1e-12

RESIDUAL_TOL = 1e-8
LANCZOS_TOL = 1e-10
LANCZOS_SHIFT_SCALE = -1e-8
LANCZOS_BUDGET_PER_EIGENVALUE = 30

# Extra eigenvalues requested beyond the descriptor dimension, absorbing
# multiple zero eigenvalues (disconnected or near-degenerate inputs) without
# recomputation.
EXTRA_EIGENVALUES = 4

DEFAULT_DESCRIPTOR_DIM = 100
DEFAULT_BASELINE_DIM = 10


@dataclass(frozen=True)
class LaplaceOperator:
    """Discrete Laplace–Beltrami operator of a triangle mesh.

    ``stiffness`` is sparse symmetric positive semi-definite (dimensionless
    cotangent weights, rows summing to zero); ``mass`` is the diagonal
    barycentric vertex-area matrix.
    """

    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    n: int

    def mass_diagonal(self):
        return self.mass.diagonal()


@dataclass(frozen=True)
class Spectrum:
    """Ascending generalized eigenvalues of stiffness v = lambda mass v.

    ``zero_count`` is the number of leading eigenvalues classified as zero;
    it equals the number of connected components for a closed mesh.
    """

    eigenvalues: np.ndarray
    k: int
    zero_count: int

    def __post_init__(self):
        vals = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        vals.flags.writeable = False
        object.__setattr__(self, "eigenvalues", vals)

    def nonzero_eigenvalues(self):
        return self.eigenvalues[self.zero_count:]


@dataclass(frozen=True)
class SpectralDescriptor:
    """Nonnegative feature vector for one shape (ShapeDNA or GPS)."""

    values: np.ndarray
    kind: str
    shape_name: str = ""

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def p(self):
        return len(self.values)


def assemble_lbo(mesh):
    """Assemble cotangent stiffness and lumped mass matrices.

    Raises
    ------
    EmptyMesh
        No vertices or no faces.
    DegenerateFace
        A face area at or below the mesh's area epsilon, or a vertex with no
        incident face (zero mass entry).

    Warns with :class:`NonClosedMesh` when boundary edges are present; the
    cotangent weights then behave like a natural (Neumann) boundary.
    """
    n = mesh.vertex_count
    if n == 0 or mesh.face_count == 0:
        raise EmptyMesh("mesh has no vertices or no faces")

    areas = mesh_mod.face_areas(mesh)
    eps = mesh_mod.area_epsilon(mesh)
    if (areas <= eps).any():
        bad = int(np.argmax(areas <= eps))
        raise DegenerateFace(
            f"face {bad} has area {areas[bad]:.3e} <= areaEpsilon {eps:.3e}"
        )

    summary = mesh_mod.validate_mesh(mesh)
    if not summary.closed:
        warnings.warn(
            f"mesh {mesh.name!r} has {summary.boundary_edges} boundary edges",
            NonClosedMesh,
            stacklevel=2,
        )

    v = mesh.vertices
    f = mesh.faces
    rows = []
    cols = []
    vals = []
    # Corner c of each triangle faces the edge (c+1, c+2); its cotangent is
    # dot(e1, e2) / (2 * area) with e1, e2 the edges leaving the corner.
    for corner in range(3):
        i = f[:, (corner + 1) % 3]
        j = f[:, (corner + 2) % 3]
        e1 = v[i] - v[f[:, corner]]
        e2 = v[j] - v[f[:, corner]]
        cot = np.einsum("ij,ij->i", e1, e2) / (2.0 * areas)
        if not np.isfinite(cot).all():
            raise DegenerateFace("non-finite cotangent weight")
        half = -0.5 * cot
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([half, half])

    off = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    off = 0.5 * (off + off.T)  # exact symmetry regardless of summation order
    row_sums = np.asarray(off.sum(axis=1)).ravel()
    stiffness = (off + sparse.diags(-row_sums, format="csr")).tocsr()

    mass_diag = np.zeros(n)
    third = areas / 3.0
    for corner in range(3):
        np.add.at(mass_diag, f[:, corner], third)
    if (mass_diag <= 0).any():
        bad = int(np.argmax(mass_diag <= 0))
        raise DegenerateFace(f"vertex {bad} has no incident face; mass entry is zero")

    return LaplaceOperator(stiffness=stiffness, mass=sparse.diags(mass_diag, format="csr"), n=n)


def _dense_eigenvalues(op, k):
    """Direct solve: reduce by the (diagonal) Cholesky factor of the mass."""
    inv_sqrt = 1.0 / np.sqrt(op.mass_diagonal())
    b = op.stiffness.toarray()
    b *= inv_sqrt[None, :]
    b *= inv_sqrt[:, None]
    b = 0.5 * (b + b.T)
    vals, vecs = np.linalg.eigh(b)
    return vals[:k], inv_sqrt[:, None] * vecs[:, :k]


def _lanczos_eigenvalues(op, k):
    """Shift-invert Lanczos around a slightly negative shift.

    The start vector is fixed (results must not depend on scheduling or run
    count) and the Krylov subspace is kept generous so that clustered
    eigenvalue multiplets are resolved completely.
    """
    shift = LANCZOS_SHIFT_SCALE * float(np.mean(op.stiffness.diagonal()))
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(op.n)
    try:
        vals, vecs = eigsh(
            op.stiffness.tocsc(),
            k=k,
            M=op.mass.tocsc(),
            sigma=shift,
            which="LM",
            v0=v0,
            ncv=min(op.n, max(4 * k + 1, 40)),
            tol=LANCZOS_TOL,
            maxiter=LANCZOS_BUDGET_PER_EIGENVALUE * k,
        )
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"Lanczos iteration budget exhausted: {exc}") from exc
    except ArpackError as exc:
        raise ConvergenceFailure(f"Lanczos failure: {exc}") from exc
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def smallest_eigenpairs(op, k):
    """Compute the ``k`` smallest generalized eigenvalues of the operator.

    Eigenvectors are used to verify residuals and then discarded; only the
    ascending, nonnegative eigenvalues are retained.

    Raises
    ------
    KTooLarge
        ``k`` exceeds the vertex count (or is not positive).
    ConvergenceFailure
        Iteration budget exhausted, residuals above tolerance, or negative
        eigenvalues beyond the zero threshold.
    """
    if k < 1:
        raise KTooLarge(f"k must be positive, got {k}")
    if k > op.n:
        raise KTooLarge(f"requested {k} eigenvalues of a {op.n}-vertex operator")

    if op.n <= DENSE_CUTOFF or k >= op.n - 1:
        vals, vecs = _dense_eigenvalues(op, k)
    else:
        vals, vecs = _lanczos_eigenvalues(op, k)

    residuals = op.stiffness @ vecs - (op.mass @ vecs) * vals[None, :]
    stiffness_norm = float(np.abs(op.stiffness).sum(axis=1).max())
    worst = float(np.linalg.norm(residuals, axis=0).max())
    if worst > RESIDUAL_TOL * max(stiffness_norm, 1e-300):
        raise ConvergenceFailure(
            f"eigenpair residual {worst:.3e} exceeds {RESIDUAL_TOL:.0e} * |stiffness|"
        )

    largest = float(vals[-1])
    zero_threshold = max(ZERO_THRESHOLD_REL * abs(largest), ZERO_THRESHOLD_ABS)
    if (vals < -zero_threshold).any():
        raise ConvergenceFailure(
            f"eigenvalue {vals.min():.3e} below -zeroThreshold; solver failure"
        )
    vals = np.maximum(vals, 0.0)
    zero_count = int((vals < zero_threshold).sum())
    vals[:zero_count] = 0.0  # kernel eigenvalues carry no shape information
    return Spectrum(eigenvalues=vals, k=k, zero_count=zero_count)


def _leading_nonzero(spectrum, p):
    if p < 1:
        raise InsufficientEigenvalues(f"descriptor dimension must be positive, got {p}")
    nonzero = spectrum.nonzero_eigenvalues()
    if len(nonzero) < p:
        raise InsufficientEigenvalues(
            f"need {p} nonzero eigenvalues but spectrum holds {len(nonzero)} "
            f"(request k >= p + zeroCount = {p + spectrum.zero_count})"
        )
    return nonzero[:p]


def shape_dna(spectrum, p, name=""):
    """Truncated ascending nonzero eigenvalue sequence (not yet normalized).

    Leading zero eigenvalues carry no shape information and are dropped;
    inputs with several connected components shed several zeros.
    """
    return SpectralDescriptor(values=_leading_nonzero(spectrum, p), kind="shapedna", shape_name=name)


def gps(spectrum, p, name=""):
    """Inverse square roots of the nonzero eigenvalues (not yet normalized)."""
    return SpectralDescriptor(
        values=1.0 / np.sqrt(_leading_nonzero(spectrum, p)), kind="gps", shape_name=name
    )


def normalize(descriptor):
    """Divide by the Euclidean norm so descriptors compare across scales."""
    norm = float(np.linalg.norm(descriptor.values))
    if norm == 0.0:
        raise ZeroDescriptor("cannot normalize a zero descriptor")
    return replace(descriptor, values=descriptor.values / norm)


def descriptor_for_mesh(mesh, kind, p=DEFAULT_DESCRIPTOR_DIM, k=None):
    """Mesh → normalized descriptor, end to end.

    Requests ``k = p + 4`` eigenvalues by default so that inputs shedding
    two or three zero eigenvalues still yield ``p`` nonzero ones; on meshes
    with fewer vertices than that, ``k`` falls back to the vertex count.
    """
    if kind not in ("shapedna", "gps"):
        raise ValueError(f"kind must be 'shapedna' or 'gps', got {kind!r}")
    operator = assemble_lbo(mesh)
    if k is None:
        k = min(p + EXTRA_EIGENVALUES, operator.n)
    spectrum = smallest_eigenpairs(operator, k)
    build = shape_dna if kind == "shapedna" else gps
    return normalize(build(spectrum, p, name=mesh.name))
