"""Shared test oracles built independently of the package kernels.

Everything here assembles operators the brute-force way, from explicit
2x2 Pauli matrices and Kronecker products, so the matrix-free kernels
are checked against a construction that shares no code with them.
Site 0 is the least significant bit of the basis index, which puts it
in the last Kronecker factor.
"""

import numpy as np
import pytest

# single-site Pauli matrices in basis order (|0> = down, |1> = up)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
SZ = np.array([[-1.0, 0.0], [0.0, 1.0]])
ID2 = np.eye(2)


def site_operator(op, site, n_sites):
    """op acting on `site`, identity elsewhere (site 0 = least significant bit)."""
    return np.kron(np.eye(1 << (n_sites - 1 - site)),
                   np.kron(op, np.eye(1 << site)))


def dense_total_sigma_x(n_sites, sites):
    out = np.zeros((1 << n_sites, 1 << n_sites))
    for i in sites:
        out += site_operator(SX, i, n_sites)
    return out


def dense_bath_hamiltonian(model):
    """HB as an explicit 2^N x 2^N matrix (bath bit i-1 <-> bath spin i)."""
    n = model.n_bath
    dim = 1 << n
    h = np.zeros((dim, dim))
    for i in range(n):
        h += 0.5 * model.omegas[i] * site_operator(SZ, i, n)
        h += model.beta * site_operator(SX, i, n)
    for i in range(n):
        for j in range(i + 1, n):
            h += model.lam * site_operator(SX, i, n) @ site_operator(SX, j, n)
    return h


def dense_interaction(model):
    n_sites = model.n_bath + 1
    dim = 1 << n_sites
    h = np.zeros((dim, dim))
    sx0 = site_operator(SX, 0, n_sites)
    for i in range(1, n_sites):
        h += model.lambda0 * site_operator(SX, i, n_sites) @ sx0
    return h


def dense_full_hamiltonian(model):
    """H = H0 + HB + HI as an explicit 2^(N+1) square matrix."""
    n_sites = model.n_bath + 1
    dim = 1 << n_sites
    h = np.zeros((dim, dim))
    h += 0.5 * model.omega0 * site_operator(SZ, 0, n_sites)
    h += model.beta * site_operator(SX, 0, n_sites)
    for i in range(1, n_sites):
        h += 0.5 * model.omegas[i - 1] * site_operator(SZ, i, n_sites)
        h += model.beta * site_operator(SX, i, n_sites)
    for i in range(1, n_sites):
        for j in range(i + 1, n_sites):
            h += model.lam * site_operator(SX, i, n_sites) @ site_operator(SX, j, n_sites)
    h += dense_interaction(model)
    return h


def random_state(rng, dim, complex_=True):
    v = rng.standard_normal(dim)
    if complex_:
        v = v + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_model(rng, n_bath, lam=None, beta=0.01, lambda0=1.0):
    from spinbath import SpinBathModel

    return SpinBathModel(
        n_bath=n_bath,
        omega0=0.8288,
        beta=beta,
        lambda0=lambda0,
        lam=rng.uniform(-2, 2) if lam is None else lam,
        omegas=tuple(rng.uniform(0.05, 1.0, n_bath)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
