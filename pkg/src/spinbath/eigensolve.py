"""Dense and Lanczos eigensolvers for symmetric matrix-free operators.

The dense route materializes the operator column by column and hands it
to LAPACK's symmetric eigensolver; it is the oracle and the small-system
production path.  The Lanczos route extracts the M lowest eigenpairs of
a large operator from matrix-vector products alone, with full
reorthogonalization and random restarts so that degenerate multiplets
are fully resolved.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError, OperatorContractError, ResourceLimitError
from .hilbert import apply_total_sigma_x

__all__ = [
    "EigenPair",
    "BathSpectrum",
    "dense_spectrum",
    "lanczos_lowest",
    "resolve_sigma_x_multiplets",
    "DENSE_DIM_GUARD",
]

DENSE_DIM_GUARD = 4096


@dataclass(frozen=True)
class EigenPair:
    """One normalized eigenvector with its eigenvalue."""

    energy: float
    vector: np.ndarray


@dataclass
class BathSpectrum:
    """Eigenpairs of a symmetric operator, sorted ascending by energy.

    `vectors[:, n]` belongs to `energies[n]`.  `residuals[n]` is the
    explicitly computed ||H v - E v||.  `complete` is True when every
    eigenpair of the operator is present.
    """

    energies: np.ndarray
    vectors: np.ndarray
    method: str
    residuals: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.vectors = np.asarray(self.vectors)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.dim == 0:
            self.dim = self.vectors.shape[0]
        if np.any(np.diff(self.energies) < -1e-12 * max(1.0, np.abs(self.energies).max())):
            raise ValueError("energies must be sorted ascending")

    @property
    def count(self):
        return len(self.energies)

    @property
    def complete(self):
        return self.count == self.dim

    @property
    def pairs(self):
        return [EigenPair(float(e), self.vectors[:, i])
                for i, e in enumerate(self.energies)]

    def truncate(self, m):
        """Spectrum restricted to the m lowest pairs."""
        if m > self.count:
            raise ValueError(f"cannot truncate to {m} of {self.count} pairs")
        return BathSpectrum(self.energies[:m].copy(), self.vectors[:, :m].copy(),
                            self.method, self.residuals[:m].copy(), dim=self.dim)


def _materialize(apply, dim):
    """Build the dense operator matrix by applying the kernel to basis vectors."""
    cols = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        col = apply(e)
        if np.iscomplexobj(col):
            if np.abs(col.imag).max() > 1e-13 * max(1.0, np.abs(col.real).max()):
                raise OperatorContractError("operator is not real symmetric")
            col = col.real
        cols[:, j] = col
        e[j] = 0.0
    return cols


def _residuals(apply, energies, vectors):
    res = np.empty(len(energies))
    for i, e in enumerate(energies):
        res[i] = np.linalg.norm(apply(vectors[:, i]) - e * vectors[:, i])
    return res


def dense_spectrum(apply, dim):
    """All eigenpairs of a symmetric operator given by its action.

    Guarded at dimension 4096: beyond that the dense matrix no longer
    fits the resource budget and the Lanczos route must be used.
    """
    if dim > DENSE_DIM_GUARD:
        raise ResourceLimitError(
            f"dense solve of dimension {dim} exceeds guard {DENSE_DIM_GUARD}"
        )
    mat = _materialize(apply, dim)
    scale = max(1.0, float(np.abs(mat).max()))
    asym = float(np.abs(mat - mat.T).max())
    if asym > 1e-12 * scale:
        raise OperatorContractError(
            f"operator asymmetry {asym:.2e} exceeds tolerance"
        )
    mat = 0.5 * (mat + mat.T)
    energies, vectors = np.linalg.eigh(mat)
    res = np.empty(dim)
    hv = mat @ vectors
    for i in range(dim):
        res[i] = np.linalg.norm(hv[:, i] - energies[i] * vectors[:, i])
    return BathSpectrum(energies, vectors, "dense", res, dim=dim)


class _Lanczos:
    """Work state for the deflated, fully reorthogonalized Lanczos runs."""

    def __init__(self, apply, dim, tol, seed, max_applies):
        self.apply = apply
        self.dim = dim
        self.tol = tol
        self.rng = np.random.default_rng(seed)
        self.max_applies = max_applies
        self.applies = 0
        self.pool_vals = []
        self.pool_vecs = []
        self.scale = 1.0

    def _apply(self, v):
        if self.applies >= self.max_applies:
            raise ConvergenceError(
                f"Lanczos hit the {self.max_applies}-application cap with "
                f"{len(self.pool_vals)} converged pairs",
                best_residuals=np.array(sorted(self.pool_vals)),
            )
        self.applies += 1
        w = np.asarray(self.apply(v))
        if np.iscomplexobj(w):
            if np.abs(w.imag).max() > 1e-10 * max(1.0, np.abs(w.real).max()):
                raise OperatorContractError(
                    "operator returned a genuinely complex result on real input"
                )
            w = np.ascontiguousarray(w.real)
        return w.astype(float, copy=False)

    def _deflate(self, w):
        for v in self.pool_vecs:
            w -= (v @ w) * v
        return w

    def _start_vector(self):
        for _ in range(20):
            v = self._deflate(self.rng.standard_normal(self.dim))
            nrm = np.linalg.norm(v)
            if nrm > 1e-8:
                return v / nrm
        raise ConvergenceError("no start vector outside the converged subspace")

    def run(self, need):
        """One Krylov pass converging the `need` lowest Ritz pairs of the
        pool-deflated operator; converged pairs join the pool.  Returns the
        values added."""
        sub_dim = self.dim - len(self.pool_vals)
        need = min(need, sub_dim)
        if need == 0:
            return []
        basis = [self._start_vector()]
        alphas, betas = [], []
        exhausted = False
        while True:
            w = self._apply(basis[-1])
            alphas.append(float(basis[-1] @ w))
            # full reorthogonalization against the pool and the whole
            # Krylov basis, two passes for numerical safety
            for _ in range(2):
                w = self._deflate(w)
                for v in basis:
                    w -= (v @ w) * v
            beta = float(np.linalg.norm(w))
            k = len(alphas)
            self.scale = max(self.scale, _spectral_scale(alphas, betas))
            if k == sub_dim or beta <= 1e-13 * self.scale:
                exhausted = True  # Krylov space closed: Ritz pairs are exact
                break
            if k >= need and self._ritz_converged(alphas, betas, beta, need):
                break
            betas.append(beta)
            basis.append(w / beta)
        return self._extract(basis, alphas, betas, need, exhausted)

    def _ritz_converged(self, alphas, betas, beta, need):
        theta, s = _tridiag_lowest(alphas, betas, need)
        return np.all(np.abs(beta * s[-1, :]) <= 0.1 * self.tol * self.scale)

    def _extract(self, basis, alphas, betas, need, exhausted):
        k = len(alphas)
        take = min(need, k)
        theta, s = _tridiag_lowest(alphas, betas[: k - 1], take)
        q_mat = np.column_stack(basis[:k])
        added = []
        for j in range(take):
            x = self._deflate(q_mat @ s[:, j])
            nrm = np.linalg.norm(x)
            if nrm < 1e-8:
                continue
            x /= nrm
            r = float(np.linalg.norm(self._apply(x) - theta[j] * x))
            if r <= self.tol * self.scale or exhausted:
                self.pool_vals.append(float(theta[j]))
                self.pool_vecs.append(x)
                added.append(float(theta[j]))
            else:
                break  # higher Ritz pairs of this run are no better
        return added


def _tridiag_lowest(alphas, betas, count):
    """Lowest `count` eigenpairs of the Lanczos tridiagonal section."""
    d = np.asarray(alphas, dtype=float)
    e = np.asarray(betas, dtype=float)[: len(d) - 1]
    if len(d) == 1:
        return d.copy(), np.ones((1, 1))
    return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))


def lanczos_lowest(apply, dim, m, tol=1e-10, seed=0, max_applies=None):
    """The m lowest eigenpairs of a symmetric operator, matrix-free.

    Single-vector Lanczos with full reorthogonalization against the whole
    Krylov basis and explicit deflation against converged pairs.  Runs
    restart with fresh random vectors after breakdown of the three-term
    recurrence, which is also what resolves degeneracies: a restart
    explores the orthogonal complement of everything converged so far, so
    degenerate partners are picked up one copy per pass.  After m pairs
    are available a verification pass converges the lowest state of the
    deflated operator; the window is complete only once that state lies
    at or above the m-th retained energy.

    `tol` bounds the residual ||H v - E v|| relative to the spectral
    scale seen during the iteration.  Raises ConvergenceError (carrying
    the best converged values) after 50*m operator applications by
    default.
    """
    if m > dim:
        raise ValueError(f"requested {m} pairs from dimension {dim}")
    if m < 1:
        raise ValueError("m must be >= 1")
    state = _Lanczos(apply, dim, tol, seed, max_applies or 50 * m)

    while len(state.pool_vals) < m:
        state.run(m - len(state.pool_vals))

    # completeness check: no strictly lower state may remain outside the
    # pool (degenerate partners of interior values are interchangeable)
    slack = max(state.tol * state.scale, 1e-12 * state.scale)
    while len(state.pool_vals) < dim:
        e_m = sorted(state.pool_vals)[m - 1]
        added = state.run(1)
        if not added or min(added) >= e_m - slack:
            break

    order = np.argsort(state.pool_vals, kind="stable")[:m]
    energies = np.array(state.pool_vals)[order]
    vectors = np.column_stack([state.pool_vecs[i] for i in order])
    res = _residuals(apply, energies, vectors)
    return BathSpectrum(energies, vectors, "lanczos", res, dim=dim)


def _spectral_scale(alphas, betas):
    s = max(abs(a) for a in alphas) if alphas else 0.0
    if betas:
        s = max(s, max(abs(b) for b in betas))
    return s


def resolve_sigma_x_multiplets(spectrum, gap_tol=1e-9):
    """Rotate degenerate multiplets so each eigenvector diagonalizes Sigma_x.

    Within any group of eigenvalues closer than `gap_tol` the eigenbasis
    is arbitrary; per-state <Sigma_x> would then depend on solver
    round-off.  Diagonalizing Sigma_x inside each multiplet makes the
    reported expectations deterministic, ordered ascending in <Sigma_x>
    within the multiplet.  Vectors must be bath-only (dimension 2^N).
    """
    energies = spectrum.energies
    vectors = spectrum.vectors.copy()
    n = spectrum.count
    i = 0
    while i < n:
        j = i + 1
        while j < n and energies[j] - energies[j - 1] < gap_tol:
            j += 1
        if j - i > 1:
            block = vectors[:, i:j]
            sx_block = np.column_stack(
                [apply_total_sigma_x(block[:, c], bath_only=True)
                 for c in range(j - i)]
            )
            mat = block.T @ sx_block
            mat = 0.5 * (mat + mat.T)
            _, rot = np.linalg.eigh(mat)
            vectors[:, i:j] = block @ rot
        i = j
    return BathSpectrum(energies.copy(), vectors, spectrum.method + "+sx",
                        spectrum.residuals.copy(), dim=spectrum.dim)
