"""Thermal ensembles, reduced densities and physical observables.

The bath starts in thermal equilibrium: a Boltzmann mixture of its
eigenstates.  At low temperature the mixture is truncated to the M
lowest states, guarded by an explicit occupation diagnostic.  The
central spin starts pure 'up', so each ensemble member is a bath
eigenstate embedded into the full space.

Observables are the central spin's reduced density (equivalently its
polarization vector and entropy) and the thermal average of the
system-bath interaction energy.  Two evolution backends feed these: the
Runge-Kutta trajectories (any size) and, for systems small enough to
diagonalize fully, an exact spectral evaluation that never materializes
the evolved density matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from .eigensolve import BathSpectrum, dense_spectrum
from .errors import TruncationError
from .hilbert import (
    HamiltonianAction,
    _flipped,
    apply_interaction,
    apply_total_sigma_x,
)

__all__ = [
    "ThermalEnsemble",
    "build_thermal_ensemble",
    "embed_initial_states",
    "ReducedDensity",
    "reduced_density",
    "polarization_from_rho",
    "entropy_from_polarization",
    "interaction_average",
    "sigma_x_expectations",
    "avg_sigma_x",
    "ObservableSeries",
    "spectral_observable_series",
]

LN2 = float(np.log(2.0))


@dataclass
class ThermalEnsemble:
    """Boltzmann mixture over the M lowest bath eigenstates.

    `spectrum` holds exactly the retained pairs.  `log_partition` is
    ln Q over the retained set (Q itself overflows double precision at
    low temperature, so only its logarithm is stored).
    `truncation_bound` is P(E_B > E_M) when the full spectrum was
    available, else None; `ratio_r` = exp((E_1 - E_M)/kT) is always
    recorded.
    """

    spectrum: BathSpectrum
    kT: float
    weights: np.ndarray
    log_partition: float
    truncation_bound: float | None
    ratio_r: float

    @property
    def count(self):
        return len(self.weights)


def build_thermal_ensemble(spectrum, kT, m=None, bound_tol=1e-4):
    """Normalized Boltzmann weights over the m lowest pairs of `spectrum`.

    The truncation diagnostic is P(E_B > E_m) when `spectrum` is complete
    and the weight ratio r = exp((E_1 - E_m)/kT) otherwise; construction
    fails if the diagnostic exceeds `bound_tol`.
    """
    if kT <= 0:
        raise ValueError("temperature must be positive")
    count = spectrum.count
    if count < 1:
        raise ValueError("spectrum holds no eigenpairs")
    m = count if m is None else min(int(m), count)
    if m < 1:
        raise ValueError("m must be >= 1")

    energies = spectrum.energies
    shifted = np.exp(-(energies - energies[0]) / kT)
    q_kept = float(shifted[:m].sum())
    weights = shifted[:m] / q_kept
    log_partition = float(-energies[0] / kT + np.log(q_kept))
    ratio_r = float(shifted[m - 1])

    if spectrum.complete:
        truncation_bound = float(1.0 - q_kept / shifted.sum())
        diagnostic = truncation_bound
    else:
        truncation_bound = None
        diagnostic = ratio_r
    if diagnostic > bound_tol:
        raise TruncationError(
            f"truncation diagnostic {diagnostic:.3e} exceeds bound {bound_tol:.3e} "
            f"(m={m}, kT={kT})",
            diagnostic=diagnostic,
        )
    return ThermalEnsemble(spectrum.truncate(m), float(kT), weights,
                           log_partition, truncation_bound, ratio_r)


def embed_initial_states(ensemble):
    """Tensor each retained bath eigenstate with the central spin 'up'.

    Bath amplitude at bath index j lands on full index 2*j + 1 (bit 0
    set); the embedding is isometric.
    """
    vecs = ensemble.spectrum.vectors
    bath_dim, m = vecs.shape
    out = np.zeros((m, 2 * bath_dim), dtype=np.complex128)
    out[:, 1::2] = vecs.T
    return out


def polarization_from_rho(rho):
    """Polarization vector(s) Tr[rho sigma] of 2x2 density matrices.

    `rho` has shape (..., 2, 2) in basis order (down, up); returns
    shape (..., 3).  In this ordering sigma_y = [[0, i], [-i, 0]], so
    Py = +2 Im rho[0, 1].
    """
    rho = np.asarray(rho)
    px = 2.0 * np.real(rho[..., 0, 1])
    py = 2.0 * np.imag(rho[..., 0, 1])
    pz = np.real(rho[..., 1, 1] - rho[..., 0, 0])
    return np.stack([px, py, pz], axis=-1)


def entropy_from_polarization(p):
    """Von Neumann entropy of a qubit with polarization modulus p.

    S = -(1/2) ln((1-p^2)/4) - (p/2) ln((1+p)/(1-p)); the limits p -> 1
    (pure state, S=0) and p = 0 (maximally mixed, S=ln 2) are handled.
    Values outside [0, 1] beyond a 1e-10 slack raise.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < -1e-10) or np.any(p_arr > 1.0 + 1e-10):
        raise ValueError("polarization modulus outside [0, 1]")
    p_c = np.clip(p_arr, 0.0, 1.0)
    one_m = 1.0 - p_c
    one_p = 1.0 + p_c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -0.5 * (np.log(one_m) + np.log(one_p) - np.log(4.0)) \
            - 0.5 * p_c * (np.log(one_p) - np.log(one_m))
    s = np.where(one_m == 0.0, 0.0, s)
    out = np.maximum(s, 0.0)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


@dataclass
class ReducedDensity:
    """2x2 reduced density of the central spin with derived indicators."""

    matrix: np.ndarray
    polarization: np.ndarray
    entropy: float

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.complex128)
        pol = polarization_from_rho(matrix)
        return cls(matrix, pol, entropy_from_polarization(np.linalg.norm(pol)))

    def check(self, trace_tol=1e-12):
        """Validate the type invariants; raises on violation."""
        tr = complex(np.trace(self.matrix))
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace {tr} deviates from 1 beyond {trace_tol}")
        herm = np.abs(self.matrix - self.matrix.conj().T).max()
        if herm > 1e-12:
            raise ValueError(f"hermiticity violation {herm:.2e}")
        p = np.linalg.norm(self.polarization)
        if p > 1.0 + 1e-10:
            raise ValueError(f"|P| = {p} exceeds 1")
        if not (-1e-12 <= self.entropy <= LN2 + 1e-12):
            raise ValueError(f"entropy {self.entropy} outside [0, ln 2]")
        recon = 0.5 * (np.eye(2) + self.polarization[0] * np.array([[0, 1], [1, 0]])
                       + self.polarization[1] * np.array([[0, 1j], [-1j, 0]])
                       + self.polarization[2] * np.diag([-1.0, 1.0]))
        if np.abs(recon - self.matrix).max() > 1e-12 + 0.5 * abs(tr - 1.0):
            raise ValueError("matrix and polarization representations disagree")
        return self


def reduced_density(states, weights, trace_tol=1e-9):
    """Weighted partial trace over the bath: rho_0 = sum_n w_n Tr_B |psi_n><psi_n|.

    Accumulates the four 2x2 entries directly from the amplitudes; the
    full evolved density matrix is never formed.  `trace_tol` allows for
    integrator norm drift when the states come from a long propagation.
    """
    states = np.atleast_2d(np.asarray(states))
    weights = np.asarray(weights, dtype=float)
    if states.shape[0] != weights.shape[0]:
        raise ValueError(
            f"{states.shape[0]} states but {weights.shape[0]} weights"
        )
    view = states.reshape(states.shape[0], -1, 2)
    rho = np.einsum("nja,n,njb->ab", view, weights, view.conj())
    rd = ReducedDensity.from_matrix(rho)
    rd.check(trace_tol=trace_tol)
    return rd


def interaction_average(states, weights, model):
    """Thermal average sum_n w_n <psi_n|H_I|psi_n> at one time."""
    states = np.atleast_2d(np.asarray(states))
    weights = np.asarray(weights, dtype=float)
    if states.shape[0] != weights.shape[0]:
        raise ValueError(
            f"{states.shape[0]} states but {weights.shape[0]} weights"
        )
    total = 0.0
    for w, psi in zip(weights, states):
        total += w * float(np.real(np.vdot(psi, apply_interaction(model, psi))))
    return total


def sigma_x_expectations(spectrum):
    """<phi_n|Sigma_x|phi_n> for every pair, ascending in energy.

    Expects bath-only eigenvectors whose degenerate multiplets have been
    Sigma_x-resolved (see eigensolve.resolve_sigma_x_multiplets), which
    makes the values deterministic.
    """
    vecs = spectrum.vectors
    sx_vecs = apply_total_sigma_x(vecs, bath_only=True)
    return np.real(np.einsum("dn,dn->n", np.conj(vecs), sx_vecs))


def avg_sigma_x(spectrum, count=20):
    """Unweighted mean of <Sigma_x> over the `count` lowest eigenstates."""
    if count > spectrum.count:
        raise ValueError(
            f"need {count} states, spectrum holds {spectrum.count}"
        )
    return float(sigma_x_expectations(spectrum)[:count].mean())


@dataclass
class ObservableSeries:
    """Time series of the reduced density and the interaction average.

    `rho` has shape (n_times, 2, 2); polarization and entropy are derived
    from it on construction.  `metadata` records model parameters, seeds
    and solver diagnostics for the run that produced the series.
    """

    times: np.ndarray
    rho: np.ndarray
    interaction: np.ndarray
    metadata: dict = field(default_factory=dict)
    polarization: np.ndarray = field(init=False)
    entropy: np.ndarray = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.rho = np.asarray(self.rho, dtype=np.complex128)
        self.interaction = np.asarray(self.interaction, dtype=float)
        if self.rho.shape != (len(self.times), 2, 2):
            raise ValueError("rho must have shape (n_times, 2, 2)")
        if self.interaction.shape != (len(self.times),):
            raise ValueError("interaction length must match times")
        self.polarization = polarization_from_rho(self.rho)
        self.entropy = entropy_from_polarization(
            np.linalg.norm(self.polarization, axis=1)
        )

    def reduced_density_at(self, index):
        return ReducedDensity.from_matrix(self.rho[index])


def spectral_observable_series(model, ensemble, times, full_spectrum=None,
                               metadata=None):
    """Exact observables via full diagonalization of the total Hamiltonian.

    Expands the thermally weighted evolved density in the eigenbasis of H
    and evaluates the four reduced-density entries and <H_I> as bilinear
    forms in the phase vector exp(-i E t).  Cost per time point is
    O(dim^2) independent of the ensemble size, so the full temperature
    range is reachable; nothing of size dim^2 x n_times is ever stored.
    """
    if full_spectrum is None:
        full_spectrum = dense_spectrum(HamiltonianAction(model), model.dim)
    if not full_spectrum.complete:
        raise ValueError("spectral evaluation needs the complete spectrum of H")
    if full_spectrum.dim != model.dim:
        raise ValueError("full spectrum dimension does not match the model")
    energies = full_spectrum.energies
    v_full = full_spectrum.vectors
    times = np.asarray(times, dtype=float)
    n_t = len(times)

    # thermally weighted density in the eigenbasis of H, via the overlaps
    # of each eigenvector with each embedded initial state
    a_ov = v_full[1::2, :].T @ ensemble.spectrum.vectors
    rho_eig = (a_ov * ensemble.weights) @ a_ov.T
    del a_ov

    def bilinear_series(w_mat, chunk=512):
        """t -> sum_pq exp(-iE_p t) w_mat[p,q] exp(+iE_q t), chunked in t.

        The trig factors are kept as contiguous real arrays so the two
        matrix products per chunk stay on the BLAS fast path.
        """
        out = np.empty(n_t, dtype=np.complex128)
        for lo in range(0, n_t, chunk):
            ph = energies[:, None] * times[None, lo : lo + chunk]
            cos_ph = np.cos(ph)
            sin_ph = np.sin(ph)
            y = w_mat @ cos_ph + 1j * (w_mat @ sin_ph)  # W exp(+iEt)
            out[lo : lo + chunk] = np.einsum(
                "pt,pt->t", cos_ph, y
            ) - 1j * np.einsum("pt,pt->t", sin_ph, y)
        return out

    # one dim x dim kernel alive at a time to bound memory
    r_dd = bilinear_series(rho_eig * (v_full[0::2, :].T @ v_full[0::2, :]))
    r_du = bilinear_series(rho_eig * (v_full[0::2, :].T @ v_full[1::2, :]))
    r_uu = bilinear_series(rho_eig * (v_full[1::2, :].T @ v_full[1::2, :]))
    hi_v = model.lambda0 * _flipped(apply_total_sigma_x(v_full), 0)
    hi_series = np.real(bilinear_series(rho_eig * (v_full.T @ hi_v)))
    del hi_v, rho_eig

    rho = np.empty((n_t, 2, 2), dtype=np.complex128)
    rho[:, 0, 0] = np.real(r_dd)
    rho[:, 0, 1] = r_du
    rho[:, 1, 0] = r_du.conj()
    rho[:, 1, 1] = np.real(r_uu)

    meta = {"method": "spectral", "max_norm_drift": 0.0, "max_energy_drift": 0.0}
    meta.update(metadata or {})
    return ObservableSeries(times, rho, hi_series, meta)
