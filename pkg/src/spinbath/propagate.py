"""Short-iterative Lanczos propagation for Hermitian matrix-free Hamiltonians.

Real time steps apply exp(-i dt H) on an adaptively grown Krylov subspace
(full reorthogonalization; the subspace is tiny compared to the state).
Imaginary time reuses the same machinery on exp(-tau H) with renormalization
after every step. When the subspace cap cannot reach the requested tolerance
the step is split recursively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .bath import SpinorState

Apply = Callable[[np.ndarray], np.ndarray]


class StepFailureError(RuntimeError):
    """A propagation step could not reach the requested tolerance."""


class ConvergenceError(RuntimeError):
    """Imaginary-time relaxation did not converge."""


@dataclass
class PropagatorConfig:
    dt: float
    tol: float = 1e-10
    krylov_dim_max: int = 30
    spectral_bounds: "tuple[float, float] | None" = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.tol <= 1e-3:
            raise ValueError("tol must lie in (0, 1e-3]")
        if self.krylov_dim_max < 4:
            raise ValueError("need a Krylov dimension of at least 4")


def _krylov_step(apply_h: Apply, amps: np.ndarray, z: complex, tol: float,
                 m_max: int, _depth: int = 0) -> np.ndarray:
    """Return exp(z H) amps for anti-Hermitian or negative-real z*H."""
    norm0 = np.linalg.norm(amps)
    if norm0 == 0.0:
        return amps
    flat = amps.ravel() / norm0
    basis = [flat]
    alphas: list[float] = []
    betas: list[float] = []
    coeffs = None
    w = None
    for m in range(1, m_max + 1):
        w = apply_h(basis[-1].reshape(amps.shape)).ravel()
        alphas.append(float(np.vdot(basis[-1], w).real))
        w = w - alphas[-1] * basis[-1]
        if len(basis) > 1:
            w = w - betas[-1] * basis[-2]
        # full reorthogonalization keeps the tridiagonal model honest
        for v in basis:
            w = w - np.vdot(v, w) * v
        beta = float(np.linalg.norm(w))
        lam, vec = eigh_tridiagonal(alphas, betas)
        coeffs = vec @ (np.exp(z * lam) * vec[0])
        happy = beta < 1e-13 * max(1.0, abs(alphas[-1]))
        if happy or (m >= 2 and abs(coeffs[-1]) < tol):
            break
        if m == m_max:
            if _depth >= 24:
                raise StepFailureError(
                    f"Krylov step stalled: dim {m_max}, tail {abs(coeffs[-1]):.2e}, "
                    f"tol {tol:.2e}")
            half = _krylov_step(apply_h, amps, z / 2, tol / 2, m_max, _depth + 1)
            return _krylov_step(apply_h, half, z / 2, tol / 2, m_max, _depth + 1)
        betas.append(beta)
        basis.append(w / beta)
    out = np.zeros_like(flat)
    for c, v in zip(coeffs, basis):
        out += c * v
    return (norm0 * out).reshape(amps.shape)


def expectation(apply_h: Apply, state: SpinorState) -> float:
    return float(np.vdot(state.amps, apply_h(state.amps)).real)


def evolve_real(state: SpinorState, apply_h: Apply, t_final: float,
                config: PropagatorConfig,
                observer: "Callable[[float, SpinorState], None] | None" = None,
                observe_dt: "float | None" = None) -> SpinorState:
    """Propagate under exp(-i H t); the observer fires on a fixed time grid."""
    amps = state.amps.copy()
    if observer is not None:
        observer(0.0, SpinorState(amps))
    stride = observe_dt if observe_dt is not None else t_final
    n_frames = max(1, int(round(t_final / stride)))
    t = 0.0
    for frame in range(1, n_frames + 1):
        t_target = frame * stride if frame < n_frames else t_final
        while t < t_target - 1e-12 * max(1.0, t_final):
            dt = min(config.dt, t_target - t)
            amps = _krylov_step(apply_h, amps, -1j * dt, config.tol,
                                config.krylov_dim_max)
            t += dt
        t = t_target
        if observer is not None:
            observer(t, SpinorState(amps))
    return SpinorState(amps)


def ground_state_imaginary_time(apply_h: Apply, seed: SpinorState,
                                config: PropagatorConfig, *,
                                energy_tol: float = 1e-8,
                                max_iter: int = 2000) -> "tuple[SpinorState, float]":
    """Relax exp(-tau H) with per-step renormalization until the energy settles."""
    amps = seed.normalized().amps
    energy = float(np.vdot(amps, apply_h(amps)).real)
    for _ in range(max_iter):
        amps = _krylov_step(apply_h, amps, -config.dt, config.tol,
                            config.krylov_dim_max)
        amps = amps / np.linalg.norm(amps)
        new_energy = float(np.vdot(amps, apply_h(amps)).real)
        scale = max(abs(new_energy), abs(energy), 1e-12)
        done = abs(new_energy - energy) <= energy_tol * scale
        energy = new_energy
        if done:
            return SpinorState(amps), energy
    raise ConvergenceError(
        f"imaginary time did not converge within {max_iter} iterations "
        f"(last energy {energy})")


@dataclass
class ZenoReport:
    t_z: float
    delta_h: float
    survival_samples: "list[tuple[float, float]]" = field(default_factory=list)
    quadratic_fit_residual: float = float("nan")


def zeno_time(state: SpinorState, apply_h: Apply,
              config: "PropagatorConfig | None" = None,
              sample_survival: bool = False,
              variance_floor: float = 1e-24) -> ZenoReport:
    """t_Z = 1/Delta_H from a single Hamiltonian application.

    <H^2> is the squared norm of H|psi>. With sampling enabled, short-time
    survival probabilities are checked against 1 - (t/t_Z)^2.
    """
    psi = state.normalized()
    h_psi = apply_h(psi.amps)
    mean = float(np.vdot(psi.amps, h_psi).real)
    second = float(np.vdot(h_psi, h_psi).real)
    variance = max(second - mean**2, 0.0)
    if variance < variance_floor:
        return ZenoReport(t_z=float("inf"), delta_h=np.sqrt(variance))
    delta_h = np.sqrt(variance)
    report = ZenoReport(t_z=1.0 / delta_h, delta_h=delta_h)
    if sample_survival:
        cfg = config or PropagatorConfig(dt=0.02 * report.t_z)
        samples = []
        times = np.linspace(0.0, 0.1 * report.t_z, 6)[1:]
        for t in times:
            evolved = evolve_real(psi, apply_h, float(t), cfg)
            p = abs(psi.overlap(evolved)) ** 2
            samples.append((float(t), float(p)))
        report.survival_samples = samples
        ts = np.array([s[0] for s in samples])
        ps = np.array([s[1] for s in samples])
        predicted = 1.0 - (ts / report.t_z) ** 2
        deficit = 1.0 - ps
        scale = np.max(np.abs(deficit)) or 1.0
        report.quadratic_fit_residual = float(
            np.max(np.abs(deficit - (1.0 - predicted))) / scale)
    return report
