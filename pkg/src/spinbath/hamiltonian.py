"""System-bath couplings and total-Hamiltonian assembly.

A TotalHamiltonian exposes the three term applications separately (the
energy channels are measured per term) plus their sum. Bath factors are
precomputed sparse matrices over the 2**K spinor axis; system factors act
along the system axis either spectrally (grid) or as small dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .bath import (BathSpec, SpinorState, bath_energy_diagonal, single_spin_matrix,
                   weighted_flip_sum, weighted_hop_sum, SPIN_HALF)
from .systems import (GridSystem, NVSpec, SystemModel, apply_grid_hamiltonian,
                      pseudo_spin_matrices, spin1_matrices)

Apply = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DipolarCoupling:
    """q (x) sum_k d_k (sdag_k + s_k): energy exchange with the bath."""
    couplings: np.ndarray

    kind = "dipolar"


@dataclass(frozen=True)
class DephasingCoupling:
    """H_s (x) sum_{j<k} c_jk hop_jk with a Gaussian inelastic bias.

    The Gaussian exponent is negative (suppressing energy-mismatched hops);
    exponent_sign=+1 restores the divergent printed form for comparison runs.
    """
    strength: float
    sigma_eps: float
    exponent_sign: int = -1

    kind = "dephasing"

    def coefficient_table(self, energies: np.ndarray) -> np.ndarray:
        n = len(energies)
        if n < 2:
            raise ValueError("dephasing coupling needs at least two bath modes")
        diff = energies[:, None] - energies[None, :]
        gauss = np.exp(self.exponent_sign * diff**2 / (2.0 * self.sigma_eps**2))
        table = self.strength / (n * (n - 1)) * gauss
        np.fill_diagonal(table, 0.0)
        return table


@dataclass(frozen=True)
class NVDipoleCoupling:
    """Full vector dipole coupling of the NV spin to each bath spin."""
    kind = "nv_dipole"


@dataclass(frozen=True)
class NVReducedCoupling:
    """Strong-field diagonal coupling gamma_k [1 - 3 n_z^2] (S_z - 1/2) s_k^z."""
    kind = "nv_reduced_dipole"


@dataclass
class TotalHamiltonian:
    """Assembled H = H_S + H_B + H_SB acting on (2**K, n_sys) amplitudes."""

    model: SystemModel
    bath: "BathSpec | None"
    coupling: object
    scenario: str = "custom"
    bath_diag: "np.ndarray | None" = None          # (2**K,)
    bath_matrix: "sp.spmatrix | None" = None       # extra non-diagonal bath term
    coupling_terms: "list[tuple[Apply, sp.spmatrix | np.ndarray]]" = field(
        default_factory=list)

    def apply_system(self, amps: np.ndarray) -> np.ndarray:
        return self.model.apply_hamiltonian(amps)

    def apply_bath(self, amps: np.ndarray) -> np.ndarray:
        out = None
        if self.bath_diag is not None:
            out = amps * self.bath_diag[:, None]
        if self.bath_matrix is not None:
            extra = self.bath_matrix @ amps
            out = extra if out is None else out + extra
        return np.zeros_like(amps) if out is None else out

    def apply_coupling(self, amps: np.ndarray) -> np.ndarray:
        out = np.zeros_like(amps)
        for sys_apply, bath_op in self.coupling_terms:
            if isinstance(bath_op, np.ndarray) and bath_op.ndim == 1:
                out += sys_apply(amps * bath_op[:, None])
            else:
                out += sys_apply(bath_op @ amps)
        return out

    def apply(self, amps: np.ndarray) -> np.ndarray:
        return self.apply_system(amps) + self.apply_bath(amps) + \
            self.apply_coupling(amps)

    # SpinorState-level conveniences
    def apply_total(self, state: SpinorState) -> SpinorState:
        if state.n_sys != self.model.n_sys:
            raise ValueError("state does not match the system dimension")
        return SpinorState(self.apply(state.amps))


def _position_multiplier(grid: GridSystem) -> Apply:
    q = grid.q
    return lambda amps: amps * q


def _matrix_multiplier(matrix: np.ndarray) -> Apply:
    m_t = matrix.T.copy()
    return lambda amps: amps @ m_t


def build_dissipation_hamiltonian(grid: GridSystem, bath: BathSpec,
                                  scenario: str = "dissipation") -> TotalHamiltonian:
    """H_S + H_B + q (x) sum_k d_k (sdag_k + s_k)."""
    model = SystemModel.from_grid(grid)
    flip = weighted_flip_sum(bath.n_modes, bath.couplings)
    return TotalHamiltonian(
        model=model, bath=bath, coupling=DipolarCoupling(bath.couplings),
        scenario=scenario, bath_diag=bath_energy_diagonal(bath.energies),
        coupling_terms=[(_position_multiplier(grid), flip)])


def build_dephasing_hamiltonian(grid: GridSystem, bath: BathSpec, strength: float,
                                sigma_eps: float, exponent_sign: int = -1,
                                scenario: str = "pure_dephasing") -> TotalHamiltonian:
    """H_S + H_B + H_s (x) sum_{j<k} c_jk (sdag_j s_k + sdag_k s_j)."""
    model = SystemModel.from_grid(grid)
    coupling = DephasingCoupling(strength, sigma_eps, exponent_sign)
    hops = weighted_hop_sum(bath.n_modes, coupling.coefficient_table(bath.energies))
    sys_apply = lambda amps: apply_grid_hamiltonian(amps, grid)
    return TotalHamiltonian(
        model=model, bath=bath, coupling=coupling, scenario=scenario,
        bath_diag=bath_energy_diagonal(bath.energies),
        coupling_terms=[(sys_apply, hops)])


def nv_bath_matrix(nv: NVSpec) -> sp.csr_matrix:
    """Zeeman term plus the full pairwise dipole tensor of the bath spins."""
    n = nv.n_modes
    zeeman = nv.zeeman_bath() * sum(
        single_spin_matrix(n, k, SPIN_HALF["sz"]) for k in range(1, n + 1))
    gamma, units = nv.pair_geometry()
    axes = ("sx", "sy", "sz")
    total = zeeman.tocsr()
    for j in range(n):
        for l in range(j + 1, n):
            tensor = np.eye(3) - 3.0 * np.outer(units[j, l], units[j, l])
            for a in range(3):
                ops_j = single_spin_matrix(n, j + 1, SPIN_HALF[axes[a]])
                for b in range(3):
                    coeff = gamma[j, l] * tensor[a, b]
                    if coeff == 0.0:
                        continue
                    ops_l = single_spin_matrix(n, l + 1, SPIN_HALF[axes[b]])
                    total = total + coeff * (ops_j @ ops_l)
    return total.tocsr()


def nv_reduced_bath_diag(nv: NVSpec) -> np.ndarray:
    """Diagonal Ising reduction: Zeeman + gamma_jk [1 - 3 n_z^2] s_j^z s_k^z."""
    n = nv.n_modes
    idx = np.arange(1 << n)
    sz = (((idx[:, None] >> np.arange(n)) & 1) - 0.5)  # (2**K, K) of +-1/2
    diag = nv.zeeman_bath() * sz.sum(axis=1)
    gamma, units = nv.pair_geometry()
    for j in range(n):
        for l in range(j + 1, n):
            coeff = gamma[j, l] * (1.0 - 3.0 * units[j, l, 2] ** 2)
            diag = diag + coeff * sz[:, j] * sz[:, l]
    return diag


def build_nv_hamiltonian(nv: NVSpec, scenario: str = "nv_center") -> TotalHamiltonian:
    model = SystemModel.from_nv(nv)
    n = nv.n_modes
    if nv.reduced:
        shift = pseudo_spin_matrices()["z"] - 0.5 * np.eye(2)
        idx = np.arange(1 << n)
        sz_bits = (((idx[:, None] >> np.arange(n)) & 1) - 0.5)
        weights = nv.gamma_center * (1.0 - 3.0 * nv.unit_vectors[:, 2] ** 2)
        coupling_diag = sz_bits @ weights
        return TotalHamiltonian(
            model=model, bath=None, coupling=NVReducedCoupling(),
            scenario=scenario, bath_diag=nv_reduced_bath_diag(nv),
            coupling_terms=[(_matrix_multiplier(shift), coupling_diag)])

    spin1 = spin1_matrices()
    axes = ("x", "y", "z")
    terms = []
    for a in range(3):
        bath_op = sp.csr_matrix((1 << n, 1 << n), dtype=complex)
        for k in range(1, n + 1):
            tensor_row = (np.eye(3)[a] -
                          3.0 * nv.unit_vectors[k - 1, a] * nv.unit_vectors[k - 1])
            for b in range(3):
                coeff = nv.gamma_center[k - 1] * tensor_row[b]
                if coeff == 0.0:
                    continue
                bath_op = bath_op + coeff * single_spin_matrix(
                    n, k, SPIN_HALF["s" + axes[b]])
        terms.append((_matrix_multiplier(spin1[axes[a]]), bath_op.tocsr()))
    return TotalHamiltonian(
        model=model, bath=None, coupling=NVDipoleCoupling(), scenario=scenario,
        bath_matrix=nv_bath_matrix(nv), coupling_terms=terms)


def commutator_residual(apply_a: Apply, apply_b: Apply,
                        probes: "Sequence[SpinorState]",
                        floor: float = 1e-30) -> float:
    """max over probes of ||[A,B] psi|| / (||AB psi|| + ||BA psi|| + floor)."""
    worst = 0.0
    for probe in probes:
        ab = apply_a(apply_b(probe.amps))
        ba = apply_b(apply_a(probe.amps))
        denom = np.linalg.norm(ab) + np.linalg.norm(ba) + floor
        worst = max(worst, float(np.linalg.norm(ab - ba) / denom))
    return worst
