"""Bit-encoded bath of K two-level systems.

The bath Hilbert space is spanned by 2**K spinor components. Bit k-1 of a
component index (counting from the least-significant bit) records whether
mode k is excited; component 0 is the fully de-excited bath. All operators
act matrix-free on amplitude arrays of shape (2**K, n_sys), the bath index
running over axis 0.

Spin operators carry the factor-1/2 normalization (eigenvalues +-1/2), not
the unit Pauli convention; every coupling built on top uses the same choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class InvalidSpectrumError(ValueError):
    """Bath spectrum parameters are inconsistent."""


class InvalidModeError(IndexError):
    """Mode index outside 1..K."""


class InvalidPairError(ValueError):
    """Pair operator requested for j == k."""


MODE_OPS = ("create", "annihilate", "sx", "sy", "sz")

# 2x2 blocks in the (|0>, |1>) basis; sigma_dag excites: |0> -> |1>.
SIGMA_DAG = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA = SIGMA_DAG.T.conj()
SPIN_HALF = {
    "create": SIGMA_DAG,
    "annihilate": SIGMA,
    "sx": (SIGMA_DAG + SIGMA) / 2.0,
    "sy": (SIGMA_DAG - SIGMA) / 2.0j,
    "sz": (SIGMA_DAG @ SIGMA - SIGMA @ SIGMA_DAG) / 2.0,
}


@dataclass(frozen=True)
class SpinorState:
    """Total wave function over (bath configuration, system index)."""

    amps: np.ndarray  # complex128, shape (2**K, n_sys)

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=complex)
        if a.ndim != 2:
            raise ValueError("amplitudes must be a 2-d array (bath, system)")
        n = a.shape[0]
        if n < 1 or n & (n - 1):
            raise ValueError(f"bath dimension {n} is not a power of two")
        object.__setattr__(self, "amps", a)

    @property
    def n_modes(self) -> int:
        return self.amps.shape[0].bit_length() - 1

    @property
    def n_sys(self) -> int:
        return self.amps.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "SpinorState":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return SpinorState(self.amps / n)

    def overlap(self, other: "SpinorState") -> complex:
        return complex(np.vdot(self.amps, other.amps))

    def copy(self) -> "SpinorState":
        return SpinorState(self.amps.copy())


def sample_spectrum(eps0: float, eps_c: float, n_modes: int,
                    scheme: str = "uniform") -> np.ndarray:
    """Discretize the bath energy interval [eps0, eps_c] into n_modes points."""
    if scheme != "uniform":
        raise InvalidSpectrumError(f"unknown sampling scheme {scheme!r}")
    if n_modes < 1:
        raise InvalidSpectrumError("need at least one bath mode")
    if n_modes == 1:
        return np.array([float(eps0)])
    if eps_c <= eps0:
        raise InvalidSpectrumError(
            f"cutoff energy {eps_c} must exceed the band bottom {eps0}")
    return np.linspace(eps0, eps_c, n_modes)


def density_of_states(energies: np.ndarray) -> np.ndarray:
    """Inverse local spacing; the last mode reuses the previous spacing."""
    energies = np.asarray(energies, dtype=float)
    if energies.size == 1:
        return np.ones(1)
    spacing = np.diff(energies)
    if np.any(spacing <= 0):
        raise InvalidSpectrumError("energies must be strictly ascending")
    return 1.0 / np.concatenate([spacing, spacing[-1:]])


def coupling_constants(energies: np.ndarray, eta: float,
                       dos: np.ndarray) -> np.ndarray:
    """d_k = sqrt(J(eps_k)/rho(eps_k)) for the linear spectral density J = eta*eps."""
    if eta < 0:
        raise InvalidSpectrumError("spectral-density slope eta must be >= 0")
    return np.sqrt(eta * np.asarray(energies, dtype=float) / np.asarray(dos))


@dataclass(frozen=True)
class BathSpec:
    """Sampled bath spectrum with couplings and density of states."""

    energies: np.ndarray
    eta: float
    couplings: np.ndarray
    dos: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.energies)

    @classmethod
    def sample(cls, eps0: float, eps_c: float, n_modes: int, eta: float,
               scheme: str = "uniform") -> "BathSpec":
        energies = sample_spectrum(eps0, eps_c, n_modes, scheme)
        dos = density_of_states(energies)
        return cls(energies=energies, eta=float(eta),
                   couplings=coupling_constants(energies, eta, dos), dos=dos)

    def validate(self) -> None:
        if self.n_modes >= 2 and np.any(np.diff(self.energies) <= 0):
            raise InvalidSpectrumError("energies must be strictly ascending")
        if np.any(self.dos <= 0):
            raise InvalidSpectrumError("density of states must be positive")
        if np.any(self.couplings < 0):
            raise InvalidSpectrumError("couplings must be non-negative")


def _mode_bit(k: int, n_modes: int) -> int:
    if not 1 <= k <= n_modes:
        raise InvalidModeError(f"mode {k} outside 1..{n_modes}")
    return 1 << (k - 1)


def apply_mode_op(state: SpinorState, k: int, which: str) -> SpinorState:
    """Act with a single-mode operator on bath mode k (1-based)."""
    if which not in MODE_OPS:
        raise ValueError(f"unknown mode operator {which!r}")
    a = state.amps
    bit = _mode_bit(k, state.n_modes)
    idx = np.arange(a.shape[0])
    has = (idx & bit) != 0
    if which == "create":
        out = np.zeros_like(a)
        src = idx[~has]
        out[src | bit] = a[src]
    elif which == "annihilate":
        out = np.zeros_like(a)
        src = idx[~has]
        out[src] = a[src | bit]
    elif which == "sx":
        out = 0.5 * a[idx ^ bit]
    elif which == "sy":
        out = a[idx ^ bit] * np.where(has, -0.5j, 0.5j)[:, None]
    else:  # sz
        out = a * np.where(has, 0.5, -0.5)[:, None]
    return SpinorState(out)


def apply_pair_hop(state: SpinorState, j: int, k: int) -> SpinorState:
    """Act with sdag_j s_k + sdag_k s_j: moves one excitation between j and k."""
    if j == k:
        raise InvalidPairError("pair hop needs two distinct modes")
    a = state.amps
    bits = _mode_bit(j, state.n_modes) | _mode_bit(k, state.n_modes)
    idx = np.arange(a.shape[0])
    occupancy = idx & bits
    differ = (occupancy != 0) & (occupancy != bits)
    out = np.zeros_like(a)
    sel = idx[differ]
    out[sel] = a[sel ^ bits]
    return SpinorState(out)


def bath_energy_diagonal(energies: np.ndarray) -> np.ndarray:
    """Diagonal of sum_k eps_k n_k over the 2**K bath configurations."""
    energies = np.asarray(energies, dtype=float)
    n_modes = len(energies)
    idx = np.arange(1 << n_modes)
    bits = (idx[:, None] >> np.arange(n_modes)) & 1
    return bits @ energies


def apply_bath_hamiltonian(state: SpinorState, spec: BathSpec) -> SpinorState:
    if (1 << spec.n_modes) != state.amps.shape[0]:
        raise ValueError("bath spec does not match the state shape")
    diag = bath_energy_diagonal(spec.energies)
    return SpinorState(state.amps * diag[:, None])


# --- sparse builders for composite Hamiltonians -----------------------------
#
# The bath factor of every coupling is a sparse (2**K, 2**K) matrix assembled
# once per scenario from the same bit arithmetic as the matrix-free operators.

def single_spin_matrix(n_modes: int, k: int, block: np.ndarray) -> sp.csr_matrix:
    """Lift a 2x2 single-spin operator to the 2**K bath space at mode k."""
    bit = _mode_bit(k, n_modes)
    dim = 1 << n_modes
    idx = np.arange(dim)
    b = (idx & bit) // bit
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([idx, idx ^ bit])
    data = np.concatenate([block[b, b], block[b, 1 - b]])
    m = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim), dtype=complex)
    m.eliminate_zeros()
    return m.tocsr()


def mode_matrix(n_modes: int, k: int, which: str) -> sp.csr_matrix:
    return single_spin_matrix(n_modes, k, SPIN_HALF[which])


def weighted_flip_sum(n_modes: int, weights: np.ndarray) -> sp.csr_matrix:
    """sum_k w_k (sdag_k + s_k): one excitation created or destroyed."""
    dim = 1 << n_modes
    idx = np.arange(dim)
    rows, cols, data = [], [], []
    for k in range(1, n_modes + 1):
        bit = 1 << (k - 1)
        rows.append(idx ^ bit)
        cols.append(idx)
        data.append(np.full(dim, weights[k - 1], dtype=complex))
    m = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    m.eliminate_zeros()
    return m.tocsr()


def weighted_hop_sum(n_modes: int, coeffs: np.ndarray) -> sp.csr_matrix:
    """sum_{j<k} C[j,k] (sdag_j s_k + sdag_k s_j) from a symmetric coefficient table."""
    dim = 1 << n_modes
    idx = np.arange(dim)
    rows, cols, data = [], [], []
    for j in range(1, n_modes + 1):
        for k in range(j + 1, n_modes + 1):
            c = coeffs[j - 1, k - 1]
            if c == 0.0:
                continue
            bits = (1 << (j - 1)) | (1 << (k - 1))
            occupancy = idx & bits
            sel = idx[(occupancy != 0) & (occupancy != bits)]
            rows.append(sel ^ bits)
            cols.append(sel)
            data.append(np.full(sel.size, c, dtype=complex))
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    m = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    return m.tocsr()


def basis_index(bits: "list[int] | np.ndarray") -> int:
    """Spinor component index for per-mode occupations [n_1, ..., n_K]."""
    return int(sum(int(b) << i for i, b in enumerate(bits)))
