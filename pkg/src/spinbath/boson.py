"""Exact rotating-wave boson-bath model via its arrowhead single-particle matrix.

The (K+1)x(K+1) symmetric arrowhead couples the system frequency to the bath
frequencies through chi_k = d_k / sqrt(2 m w_k). Its spectral decomposition
gives the closed-form evolution components U_jk(t), |U00(t)|^2, and the
envelope formula for the dissipation-to-dephasing ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec


@dataclass(frozen=True)
class ArrowheadModel:
    omega: float
    omegas: np.ndarray   # bath frequencies w_1..w_K
    chis: np.ndarray     # couplings chi_k

    def __post_init__(self):
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))
        object.__setattr__(self, "chis", np.asarray(self.chis, dtype=float))
        if self.omegas.shape != self.chis.shape:
            raise ValueError("omegas and chis must have matching shapes")

    @classmethod
    def from_bath(cls, bath: BathSpec, mass: float, omega: float) -> "ArrowheadModel":
        """Substitute eps_k -> w_k, chi_k = d_k/sqrt(2 m w_k); chi(0) := 0."""
        w = bath.energies
        with np.errstate(divide="ignore", invalid="ignore"):
            chi = np.where(w > 0,
                           bath.couplings / np.sqrt(2.0 * mass * np.maximum(w, 1e-300)),
                           0.0)
        return cls(omega=omega, omegas=w, chis=chi)

    @property
    def matrix(self) -> np.ndarray:
        k = len(self.omegas)
        m = np.zeros((k + 1, k + 1))
        m[0, 0] = self.omega
        m[0, 1:] = self.chis
        m[1:, 0] = self.chis
        m[np.arange(1, k + 1), np.arange(1, k + 1)] = self.omegas
        return m


@dataclass(frozen=True)
class SpectralDecomposition:
    model: ArrowheadModel
    eigenvalues: np.ndarray        # ascending
    eigenvectors: np.ndarray       # columns
    y0_sq: np.ndarray              # |y_0^(i)|^2 weights
    secular_residuals: np.ndarray  # normalized residual per eigenvalue


def secular_residual(model: ArrowheadModel, lam: np.ndarray) -> np.ndarray:
    """Normalized residual of w - lam = sum_j chi_j^2/(w_j - lam) per eigenvalue."""
    lam = np.atleast_1d(lam)
    gaps = model.omegas[None, :] - lam[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = model.chis[None, :] ** 2 / gaps
    s = terms.sum(axis=1)
    resid = np.abs(model.omega - lam - s)
    scale = np.abs(model.omega - lam) + np.abs(terms).sum(axis=1) + 1.0
    return resid / scale


def closed_form_weights(model: ArrowheadModel, lam: np.ndarray) -> np.ndarray:
    """|y_0|^2 = (1 + sum_j chi_j^2/(w_j - lam)^2)^-1; singular when lam ~ w_j."""
    gaps = model.omegas[None, :] - np.atleast_1d(lam)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (model.chis[None, :] ** 2 / gaps**2).sum(axis=1)
    return 1.0 / (1.0 + s)


def decompose(model: ArrowheadModel) -> SpectralDecomposition:
    """Dense symmetric diagonalization; the secular equation is kept as a check."""
    lam, vec = np.linalg.eigh(model.matrix)
    return SpectralDecomposition(
        model=model, eigenvalues=lam, eigenvectors=vec, y0_sq=vec[0] ** 2,
        secular_residuals=secular_residual(model, lam))


def evolution_matrix(decomp: SpectralDecomposition, t: float) -> np.ndarray:
    """U(t) = A exp(-i lambda t) A^T, unitary for every t."""
    phases = np.exp(-1j * decomp.eigenvalues * t)
    return (decomp.eigenvectors * phases) @ decomp.eigenvectors.T


def u00(decomp: SpectralDecomposition, t: "float | np.ndarray") -> np.ndarray:
    """System-system component sum_j |y_0^(j)|^2 exp(-i lambda_j t)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return (decomp.y0_sq[None, :] *
            np.exp(-1j * np.outer(t, decomp.eigenvalues))).sum(axis=1)


def u00_abs2(decomp: SpectralDecomposition, t: "float | np.ndarray") -> np.ndarray:
    """|U00(t)|^2 from the explicit double-cosine sum over eigenvalue gaps."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = decomp.y0_sq
    out = np.full(t.shape, float(np.sum(w**2)))
    n = len(w)
    for j in range(n - 1):
        gaps = decomp.eigenvalues[j] - decomp.eigenvalues[j + 1:]
        weights = 2.0 * w[j] * w[j + 1:]
        out = out + np.cos(np.outer(t, gaps)) @ weights
    return out


def r_envelope(decomp: SpectralDecomposition, t: "float | np.ndarray",
               h_s0: float, omega: float,
               floor: float = 1e-12) -> np.ndarray:
    """Envelope ratio |U00| - (w/2H_S(0)) (|U00| - 1/|U00|); NaN below the floor.

    h_s0 is the initial system energy taken from the spin-bath simulation.
    """
    if h_s0 <= 0:
        raise ValueError("initial system energy must be positive")
    mod = np.abs(u00(decomp, t))
    out = np.full(mod.shape, np.nan)
    ok = mod > floor
    out[ok] = mod[ok] - omega / (2.0 * h_s0) * (mod[ok] - 1.0 / mod[ok])
    return out
