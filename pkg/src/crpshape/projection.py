"""Discriminative linear projection from the coding graph.

The local scatter collects the reconstruction residuals of the coding step,
``S_c = X (I - W)(I - W)^T X^T``; the total scatter spreads samples about the
dataset mean. The projection maximizes separability over compactness:
columns are the leading eigenvectors of ``S_s p = lambda * S_c p``, solved
after a relative-trace ridge on ``S_c`` and a Cholesky reduction to a
standard symmetric eigenproblem. Class labels play no part here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._ioutil import fmt17
from .errors import CholeskyFailure, DegenerateDataset, DimensionMismatch, DimensionReduced

EPSILON_REG_DEFAULT = 1e-6
DEFAULT_OUTPUT_DIM = 15

# Generalized eigenvalues below this fraction of the largest count toward
# rank zero when capping the output dimension.
RANK_TOL_REL = 1e-9

PROJECTION_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScatterPair:
    """Local (compactness) and total (separability) scatter of one dataset.

    Both matrices are symmetrized on construction; ``mean`` is the dataset
    mean used to center the total scatter.
    """

    sc: np.ndarray
    ss: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        sc = np.ascontiguousarray(self.sc, dtype=np.float64)
        ss = np.ascontiguousarray(self.ss, dtype=np.float64)
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        if sc.shape != ss.shape or sc.ndim != 2 or sc.shape[0] != sc.shape[1]:
            raise DimensionMismatch(f"scatter shapes differ: {sc.shape} vs {ss.shape}")
        if mean.shape != (sc.shape[0],):
            raise DimensionMismatch(f"mean has shape {mean.shape}, expected ({sc.shape[0]},)")
        sc = 0.5 * (sc + sc.T)
        ss = 0.5 * (ss + ss.T)
        sc.flags.writeable = False
        ss.flags.writeable = False
        mean.flags.writeable = False
        object.__setattr__(self, "sc", sc)
        object.__setattr__(self, "ss", ss)
        object.__setattr__(self, "mean", mean)

    @property
    def m(self):
        return self.sc.shape[0]


@dataclass(frozen=True)
class ProjectionMatrix:
    """m x d linear operator onto the discriminative subspace.

    Columns are ordered by descending generalized eigenvalue and are
    orthonormal with respect to the regularized local scatter.
    """

    p: np.ndarray
    gen_eigenvalues: np.ndarray
    d: int
    epsilon_reg: float

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        vals = np.ascontiguousarray(self.gen_eigenvalues, dtype=np.float64)
        p.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gen_eigenvalues", vals)

    @property
    def m(self):
        return self.p.shape[0]


def local_scatter(x, coding):
    """``X (I - W)(I - W)^T X^T`` over the samples the coding was built from.

    Its trace equals the summed squared reconstruction residuals.
    """
    x = np.asarray(x, dtype=np.float64)
    w = coding.entries if hasattr(coding, "entries") else np.asarray(coding, dtype=np.float64)
    if x.ndim != 2 or w.shape[0] != w.shape[1] or x.shape[1] != w.shape[0]:
        raise DimensionMismatch(
            f"X is {x.shape} but coding matrix is {w.shape}; columns must match"
        )
    residuals = x - x @ w
    sc = residuals @ residuals.T
    return 0.5 * (sc + sc.T)


def total_scatter(x):
    """Centered outer-product sum and the dataset mean.

    Warns with :class:`DegenerateDataset` when all samples coincide.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise DimensionMismatch(f"need an m x N matrix with N >= 2, got {x.shape}")
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    ss = centered @ centered.T
    ss = 0.5 * (ss + ss.T)
    if not ss.any():
        warnings.warn("all samples identical; total scatter is zero", DegenerateDataset, stacklevel=2)
    return ss, mean


def scatter_pair(x, coding):
    """Convenience: both scatters of one training matrix."""
    ss, mean = total_scatter(x)
    return ScatterPair(sc=local_scatter(x, coding), ss=ss, mean=mean)


def solve_projection(pair, d, epsilon_reg=EPSILON_REG_DEFAULT):
    """Leading eigenvectors of ``S_s p = lambda * S_c_reg p``.

    ``S_c`` is regularized by ``epsilon_reg * trace(S_c)/m`` on the diagonal,
    factored by Cholesky, and the pencil reduced to a standard symmetric
    eigenproblem. The ``d`` largest eigenvalues are kept (ties broken by
    ascending index of the reduced problem), columns are back-transformed —
    automatically orthonormal under ``S_c_reg`` — and signed so that each
    column's largest-magnitude entry is positive.

    Raises :class:`CholeskyFailure` when the regularized local scatter is
    not positive definite; warns with :class:`DimensionReduced` and shrinks
    ``d`` when it exceeds the rank of the total scatter.
    """
    m = pair.m
    if not 1 <= d <= m:
        raise DimensionMismatch(f"output dimension {d} outside [1, {m}]")

    sc_reg = pair.sc + (epsilon_reg * np.trace(pair.sc) / m) * np.eye(m)
    try:
        chol = linalg.cholesky(sc_reg, lower=True)
    except linalg.LinAlgError as exc:
        raise CholeskyFailure(
            f"regularized local scatter is not positive definite: {exc}"
        ) from exc

    half = linalg.solve_triangular(chol, pair.ss, lower=True)
    reduced = linalg.solve_triangular(chol, half.T, lower=True).T
    reduced = 0.5 * (reduced + reduced.T)
    vals, vecs = np.linalg.eigh(reduced)
    vals = np.maximum(vals, 0.0)

    rank = int((vals > RANK_TOL_REL * max(vals.max(), 0.0)).sum()) if vals.max() > 0 else 0
    if d > rank:
        warnings.warn(
            f"requested dimension {d} exceeds rank {rank} of the total scatter; reducing",
            DimensionReduced,
            stacklevel=2,
        )
        d = max(rank, 1)

    order = np.argsort(-vals, kind="stable")[:d]
    columns = linalg.solve_triangular(chol.T, vecs[:, order], lower=False)
    peaks = np.abs(columns).argmax(axis=0)
    signs = np.sign(columns[peaks, np.arange(d)])
    columns = columns * np.where(signs == 0, 1.0, signs)[None, :]
    return ProjectionMatrix(
        p=columns, gen_eigenvalues=vals[order], d=d, epsilon_reg=epsilon_reg
    )


def project(pm, x):
    """Apply ``P^T`` to descriptor columns (training or unseen alike)."""
    x = np.asarray(x, dtype=np.float64)
    rows = x.shape[0]
    if rows != pm.m:
        raise DimensionMismatch(f"projection expects {pm.m} rows, got {rows}")
    return pm.p.T @ x


def projection_to_json(pm):
    """Versioned JSON-able dict; matrix row-major at full precision."""
    return {
        "version": PROJECTION_FORMAT_VERSION,
        "m": pm.m,
        "d": pm.d,
        "epsilonReg": pm.epsilon_reg,
        "genEigenvalues": [float(fmt17(v)) for v in pm.gen_eigenvalues],
        "p": [float(fmt17(v)) for v in pm.p.ravel(order="C")],
    }


def projection_from_json(doc):
    """Inverse of :func:`projection_to_json`."""
    if doc.get("version") != PROJECTION_FORMAT_VERSION:
        raise ValueError(f"unsupported projection format version {doc.get('version')!r}")
    m, d = int(doc["m"]), int(doc["d"])
    return ProjectionMatrix(
        p=np.array(doc["p"], dtype=np.float64).reshape(m, d),
        gen_eigenvalues=np.array(doc["genEigenvalues"], dtype=np.float64),
        d=d,
        epsilon_reg=float(doc["epsilonReg"]),
    )
