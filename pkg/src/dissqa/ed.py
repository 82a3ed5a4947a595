"""Brute-force thermal averages for small chains, used to validate the closed forms."""
from __future__ import annotations

from functools import reduce

import numpy as np

from .errors import ConfigError
from .model import check_chain_size, dispersion, k_values

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)

MAX_SITES = 12


def _site_op(op, i, N):
    return reduce(np.kron, [op if j == i else I2 for j in range(N)])


def _gibbs_average(H, O, beta):
    w, v = np.linalg.eigh(H)
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    diag = np.einsum("ij,jk,ki->i", v.T, O, v)
    return float(np.dot(p, diag))


def obc_spin_hamiltonian(N: int, h: float):
    """Open-chain H = -sum_{i<N} sx_i sx_{i+1} - h sum_i sz_i and the defect operator."""
    xs = [_site_op(SX, i, N) for i in range(N)]
    H = -sum(xs[i] @ xs[i + 1] for i in range(N - 1))
    H = H - h * sum(_site_op(SZ, i, N) for i in range(N))
    dim = 2**N
    ndef = sum(np.eye(dim) - xs[i] @ xs[i + 1] for i in range(N - 1)) / (2.0 * (N - 1))
    return H, ndef


def pair_sector_hamiltonian(N: int, h: float):
    """Tensor product of the N/2 pseudo-spins and the summed defect operator / N."""
    ks = k_values(N)
    d = dispersion(ks, h)
    M = len(ks)
    H = sum(d.xi[m] * _site_op(SZ, m, M) + d.delta[m] * _site_op(SX, m, M) for m in range(M))
    dim = 2**M
    ndef = sum(np.eye(dim) - np.cos(k) * _site_op(SZ, m, M) + np.sin(k) * _site_op(SX, m, M)
               for m, k in enumerate(ks)) / N
    return H, ndef


def ed_oracle_thermal(N: int, h: float, temperature: float, boundary: str = "obc-full") -> float:
    """Exact thermal <n_def>.

    ``boundary="obc-full"``: open spin chain over all 2^N states at temperature T.
    ``boundary="abc-restricted-pairs"``: the 2^(N/2) pair states of the ABC momenta
    at bath temperature T_b.
    """
    if not temperature > 0:
        raise ConfigError("temperature must be > 0")
    if N > MAX_SITES:
        raise ConfigError(f"exact diagonalisation limited to N <= {MAX_SITES}")
    beta = 1.0 / temperature
    if boundary == "obc-full":
        if N < 2:
            raise ConfigError("open chain needs N >= 2")
        H, O = obc_spin_hamiltonian(N, h)
    elif boundary == "abc-restricted-pairs":
        N = check_chain_size(N)
        H, O = pair_sector_hamiltonian(N, h)
    else:
        raise ConfigError(f"unknown boundary {boundary!r}")
    return _gibbs_average(H, O, beta)
