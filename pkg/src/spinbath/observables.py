"""Everything measured along a trajectory.

Reduced densities, purity, l1-coherence (discrete and grid-continuous),
per-term energy channels, phase-space statistics, the Lagrangian mean, and
the dissipation-to-dephasing ratio R(t). All reductions use einsum/vdot so
results do not depend on BLAS threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import SpinorState
from .hamiltonian import TotalHamiltonian
from .systems import GridSystem, SystemModel, pseudo_spin_matrices, spin1_matrices


@dataclass(frozen=True)
class ReducedDensity:
    rho: np.ndarray
    trace: float


def partial_trace_bath(state: SpinorState) -> ReducedDensity:
    """rho_S[i,j] = sum_s psi(s,i) psi*(s,j) over all bath configurations."""
    rho = np.einsum("si,sj->ij", state.amps, state.amps.conj())
    return ReducedDensity(rho=rho, trace=float(np.trace(rho).real))


def purity(rho: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho, rho).real)


def coherence_l1(rho: "np.ndarray | ReducedDensity", variant: str = "discrete",
                 dq: "float | None" = None) -> float:
    """Sum of off-diagonal magnitudes of the reduced density.

    The grid variant quadratures the continuum position kernel
    <q|rho|q'> = rho_ij/dq over dq^2 cells with the diagonal excluded, which
    reduces to sum_{i!=j}|rho_ij| * dq and is stable under grid refinement.
    """
    if isinstance(rho, ReducedDensity):
        rho = rho.rho
    offdiag = float(np.abs(rho).sum() - np.abs(np.diag(rho)).sum())
    if variant == "discrete":
        return offdiag
    if variant == "grid":
        if dq is None:
            raise ValueError("grid coherence needs the grid spacing")
        return offdiag * dq
    raise ValueError(f"unknown coherence variant {variant!r}")


def energy_channels(state: SpinorState,
                    hamiltonian: TotalHamiltonian) -> "tuple[float, float, float]":
    a = state.amps
    e_s = float(np.vdot(a, hamiltonian.apply_system(a)).real)
    e_b = float(np.vdot(a, hamiltonian.apply_bath(a)).real)
    e_sb = float(np.vdot(a, hamiltonian.apply_coupling(a)).real)
    return e_s, e_b, e_sb


@dataclass(frozen=True)
class PhaseSpaceStats:
    q_mean: float
    p_mean: float
    dq: float
    dp: float
    lagrangian: float


def phase_space_stats(state: SpinorState, grid: GridSystem) -> PhaseSpaceStats:
    """Position/momentum means and spreads plus <p^2/2m - m w^2 q^2/2>."""
    a = state.amps
    weights = np.einsum("si,si->i", a.conj(), a).real
    total = weights.sum()
    q_mean = float(grid.q @ weights / total)
    q2_mean = float((grid.q**2) @ weights / total)

    a_k = np.fft.fft(a, axis=1)
    weights_k = np.einsum("si,si->i", a_k.conj(), a_k).real
    total_k = weights_k.sum()
    p_mean = float(grid.p @ weights_k / total_k)
    p2_mean = float((grid.p**2) @ weights_k / total_k)

    lagrangian = p2_mean / (2.0 * grid.mass) - \
        0.5 * grid.mass * grid.omega**2 * q2_mean
    return PhaseSpaceStats(
        q_mean=q_mean, p_mean=p_mean,
        dq=float(np.sqrt(max(q2_mean - q_mean**2, 0.0))),
        dp=float(np.sqrt(max(p2_mean - p_mean**2, 0.0))),
        lagrangian=float(lagrangian))


def ladder_mean(q_mean: float, p_mean: float, mass: float, omega: float) -> complex:
    """<a> assembled from <q> and <p>: sqrt(m w/2) (q + i p/(m w))."""
    return np.sqrt(mass * omega / 2.0) * (q_mean + 1j * p_mean / (mass * omega))


def ratio_series(h_s: np.ndarray, a_mean: np.ndarray,
                 floor_fraction: float = 1e-8,
                 mode: str = "abs") -> np.ndarray:
    """R(t) = (|<a(0)>|/<H_S(0)>) (<H_S(t)>/|<a(t)>|); NaN where <a> underflows.

    mode selects how the complex <a> enters: "abs" (default) or "real".
    """
    h_s = np.asarray(h_s, dtype=float)
    a_mean = np.asarray(a_mean, dtype=complex)
    a_size = np.abs(a_mean) if mode == "abs" else np.abs(a_mean.real)
    if a_size[0] < 1e-300 or not np.isfinite(a_size[0]):
        raise ValueError("ratio undefined: |<a(0)>| is below the floor")
    out = np.full(h_s.shape, np.nan)
    ok = a_size > floor_fraction * a_size[0]
    out[ok] = (a_size[0] / h_s[0]) * (h_s[ok] / a_size[ok])
    return out


def nv_spin_std(rho: np.ndarray, model: SystemModel) -> "tuple[float, float]":
    """Standard deviations of the NV spin along x and z from rho_S."""
    mats = spin1_matrices() if model.kind == "nv_full" else pseudo_spin_matrices()
    stds = []
    for axis in ("x", "z"):
        m = mats[axis]
        mean = float(np.einsum("ij,ji->", rho, m).real)
        second = float(np.einsum("ij,ji->", rho, m @ m).real)
        stds.append(float(np.sqrt(max(second - mean**2, 0.0))))
    return stds[0], stds[1]


def survival_probability(initial: SpinorState, state: SpinorState) -> float:
    return float(abs(initial.overlap(state)) ** 2)
