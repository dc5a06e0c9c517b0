"""Collaborative-representation coding: reconstruct each sample from all the
others, by ridge regression (dense-ish weights) or nonnegative least squares
(sparse weights), and collect the codes into the zero-diagonal graph matrix.

Column ``i`` of the coding matrix is the code of sample ``i`` against the
leave-one-out dictionary, so the reconstruction residual is
``x_i - X @ W[:, i]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import IterationBudgetExceeded, SingularSystem

# Default ridge parameter grows linearly with the dictionary size.
RIDGE_LAMBDA_PER_SAMPLE = 0.001 / 700.0

KKT_TOL_FACTOR = 10.0
ITERATION_BUDGET_FACTOR = 3

COLUMN_NORM_TOL = 1e-10


def default_ridge_lambda(n_samples):
    """Ridge parameter 0.001 * N / 700 for an N-column dictionary."""
    return RIDGE_LAMBDA_PER_SAMPLE * n_samples


@dataclass(frozen=True)
class Dictionary:
    """Unit-norm descriptor columns acting as the coding lexicon."""

    columns: np.ndarray
    names: tuple

    def __post_init__(self):
        cols = np.array(self.columns, dtype=np.float64, order="C")
        if cols.ndim != 2:
            raise ValueError(f"columns must be an m x N matrix, got shape {cols.shape}")
        m, n = cols.shape
        if n < 2 or m < 1:
            raise ValueError(f"need N >= 2 samples of dimension m >= 1, got {m} x {n}")
        names = tuple(self.names)
        if len(names) != n:
            raise ValueError(f"{len(names)} names for {n} columns")
        norms = np.linalg.norm(cols, axis=0)
        if (np.abs(norms - 1.0) > COLUMN_NORM_TOL).any():
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(
                f"column {bad} ({names[bad]!r}) has norm {norms[bad]!r}, expected 1"
            )
        cols.flags.writeable = False
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "names", names)

    @property
    def m(self):
        return self.columns.shape[0]

    @property
    def n(self):
        return self.columns.shape[1]


@dataclass(frozen=True)
class CodeVector:
    """Reconstruction weights of one sample; the self-weight is exactly 0."""

    weights: np.ndarray
    self_index: int
    method: str

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, order="C")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def nonzero_count(self):
        return int(np.count_nonzero(self.weights))


@dataclass(frozen=True)
class CodingMatrix:
    """N x N zero-diagonal matrix whose column i codes sample i."""

    entries: np.ndarray
    method: str
    ridge_lambda: float | None = None
    kkt_tol: float | None = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.float64, order="C")
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"entries must be square, got {e.shape}")
        if np.diagonal(e).any():
            raise ValueError("coding matrix diagonal must be exactly zero")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def n(self):
        return self.entries.shape[0]

    def column_nonzeros(self):
        return np.count_nonzero(self.entries, axis=0)


def ridge_code(dictionary, i, ridge_lambda):
    """Exact minimizer of ||x_i - D w||^2 + lambda ||w||^2 over the
    leave-one-out dictionary, with 0 re-inserted at the self position.
    """
    n = dictionary.n
    if not 0 <= i < n:
        raise IndexError(f"sample index {i} outside [0, {n})")
    if not ridge_lambda > 0:
        raise ValueError(f"lambda must be positive, got {ridge_lambda}")
    if not np.isfinite(dictionary.columns).all():
        raise SingularSystem("dictionary contains non-finite entries")

    d = np.delete(dictionary.columns, i, axis=1)
    x = dictionary.columns[:, i]
    gram = d.T @ d
    gram[np.diag_indices_from(gram)] += ridge_lambda
    try:
        w = linalg.cho_solve(linalg.cho_factor(gram, lower=True), d.T @ x)
    except linalg.LinAlgError as exc:  # unreachable for finite input, lambda > 0
        raise SingularSystem(f"ridge normal equations not SPD: {exc}") from exc
    return CodeVector(weights=np.insert(w, i, 0.0), self_index=i, method="l2")


def default_kkt_tolerance(d, b):
    """10 * eps * max(m, K) * max column norm * ||b||."""
    m, k = d.shape
    col_norm = float(np.linalg.norm(d, axis=0).max()) if k else 0.0
    return (
        KKT_TOL_FACTOR
        * np.finfo(float).eps
        * max(m, k)
        * col_norm
        * float(np.linalg.norm(b))
    )


def nnls_solve(d, b, kkt_tol=None, max_iter=None):
    """Lawson–Hanson active-set solve of min ||D w - b|| subject to w >= 0.

    At termination the KKT conditions hold to within ``kkt_tol``: all
    gradient components are >= -kkt_tol and vanish on the support. Inactive
    components are exactly zero, so solutions are sparse with support at
    most the row dimension.

    Parameters
    ----------
    d : ndarray, shape (m, K)
    b : ndarray, shape (m,)
    kkt_tol : float, optional
        Dual feasibility tolerance; defaults to
        ``10 * eps * max(m, K) * maxColumnNorm(D) * ||b||``.
    max_iter : int, optional
        Iteration budget, default ``3 * K``. Exhausting it signals cycling
        or severe ill-conditioning.
    """
    d = np.ascontiguousarray(d, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if d.ndim != 2 or d.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: D is {d.shape}, b is {b.shape}")
    if not (np.isfinite(d).all() and np.isfinite(b).all()):
        raise ValueError("nnls_solve requires finite entries")
    n_cols = d.shape[1]
    if kkt_tol is None:
        kkt_tol = default_kkt_tolerance(d, b)
    if max_iter is None:
        max_iter = ITERATION_BUDGET_FACTOR * max(n_cols, 1)

    x = np.zeros(n_cols)
    passive = np.zeros(n_cols, dtype=bool)
    iterations = 0

    while True:
        gradient = d.T @ (b - d @ x)  # negated objective gradient
        candidates = ~passive & (gradient > kkt_tol)
        if not candidates.any():
            break
        # Most-violating column enters the passive (free) set.
        masked = np.where(candidates, gradient, -np.inf)
        passive[int(np.argmax(masked))] = True

        while True:
            iterations += 1
            if iterations > max_iter:
                raise IterationBudgetExceeded(
                    f"no KKT point after {max_iter} active-set iterations"
                )
            trial = np.zeros(n_cols)
            trial[passive] = np.linalg.lstsq(d[:, passive], b, rcond=None)[0]
            if trial[passive].min() > 0:
                x = trial
                break
            # Step toward the trial until the first passive variable hits
            # zero; everything driven to zero rejoins the active set.
            blocking = np.flatnonzero(passive & (trial <= 0))
            span = x[blocking] - trial[blocking]
            ratios = np.where(span > 0, x[blocking] / np.where(span > 0, span, 1.0), 0.0)
            alpha = float(ratios.min())
            x = x + alpha * (trial - x)
            x[blocking[np.argmin(ratios)]] = 0.0  # exact zero despite roundoff
            x[~passive] = 0.0
            clip = 10.0 * np.finfo(float).eps * max(1.0, float(np.abs(x).max()))
            drop = passive & (x <= clip)
            passive[drop] = False
            x[drop] = 0.0
            if not passive.any():
                # a just-added column whose trial landed nonpositive; the
                # outer loop re-checks the gradient (budget stops cycles)
                break

        # One round of iterative refinement keeps the support gradient
        # within the (tight) KKT tolerance; skipped if it would leave the
        # feasible region. The loop re-checks dual feasibility afterwards.
        support = d[:, passive]
        correction = np.linalg.lstsq(support, b - support @ x[passive], rcond=None)[0]
        refined = x[passive] + correction
        if len(refined) and refined.min() > 0:
            x[passive] = refined

    x[~passive] = 0.0
    return x + 0.0  # turn any -0.0 into +0.0


def nnls_code(dictionary, i, kkt_tol=None, max_iter=None):
    """Nonnegative code of sample i against the leave-one-out dictionary."""
    n = dictionary.n
    if not 0 <= i < n:
        raise IndexError(f"sample index {i} outside [0, {n})")
    d = np.delete(dictionary.columns, i, axis=1)
    w = nnls_solve(d, dictionary.columns[:, i], kkt_tol=kkt_tol, max_iter=max_iter)
    return CodeVector(weights=np.insert(w, i, 0.0), self_index=i, method="nnls")


def build_coding_matrix(dictionary, method, ridge_lambda=None):
    """Code every sample independently and assemble the graph matrix.

    Parameters
    ----------
    dictionary : Dictionary
    method : {'l2', 'nnls'}
        Ridge regression or nonnegative least squares per column.
    ridge_lambda : float, optional
        Required conceptually by 'l2'; defaults to 0.001 * N / 700 when
        omitted. Ignored by 'nnls'.
    """
    n = dictionary.n
    if method == "l2":
        if ridge_lambda is None:
            ridge_lambda = default_ridge_lambda(n)
        kkt_tol = None
    elif method == "nnls":
        ridge_lambda = None
        # Unit-norm columns make the per-column tolerance identical.
        kkt_tol = (
            KKT_TOL_FACTOR * np.finfo(float).eps * max(dictionary.m, n - 1)
        )
    else:
        raise ValueError(f"method must be 'l2' or 'nnls', got {method!r}")

    entries = np.zeros((n, n))
    for i in range(n):
        try:
            if method == "l2":
                code = ridge_code(dictionary, i, ridge_lambda)
            else:
                code = nnls_code(dictionary, i, kkt_tol=kkt_tol)
        except (IterationBudgetExceeded, SingularSystem) as exc:
            raise type(exc)(f"{exc} [sample {dictionary.names[i]!r}]") from exc
        entries[:, i] = code.weights
    entries[np.diag_indices(n)] = 0.0
    if method == "nnls":
        entries += 0.0  # clear any -0.0 before downstream sign tests
    return CodingMatrix(entries=entries, method=method, ridge_lambda=ridge_lambda, kkt_tol=kkt_tol)


def triplet_csv(matrix):
    """Sparse triplet export ``row,col,weight``, column-major, full precision."""
    lines = ["row,col,weight"]
    cols, rows = np.nonzero(matrix.entries.T)
    for col, row in zip(cols, rows):
        lines.append(f"{row},{col},{float(matrix.entries[row, col])!r}")
    return "\n".join(lines) + "\n"


def coding_header(matrix):
    """JSON-able header describing a coding matrix export."""
    return {
        "N": matrix.n,
        "method": matrix.method,
        "lambda": matrix.ridge_lambda,
        "kktTol": matrix.kkt_tol,
    }
