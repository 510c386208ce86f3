"""Primary-system models: Fourier-grid harmonic oscillator and NV-center spin.

Grid wave functions are stored with discrete norm sum|psi|^2 = 1; the kinetic
operator acts spectrally (FFT), so the grid size must be a power of two.
NV scenarios use angular-frequency units: energies in rad/us, time in us,
positions in nm, magnetic field in gauss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import constants
from .bath import SpinorState, basis_index


class UnsupportedExcitationError(ValueError):
    """Requested excitation does not apply to this system variant."""


@dataclass
class GridSystem:
    mass: float
    omega: float
    ng: int
    q_min: float
    q_max: float

    def __post_init__(self):
        if self.ng < 2 or self.ng & (self.ng - 1):
            raise ValueError("grid size must be a power of two")
        if self.q_max <= self.q_min:
            raise ValueError("empty grid interval")

    @classmethod
    def for_oscillator(cls, mass: float, omega: float, ng: int = 128,
                       displacement: float = 0.0, padding: float = 6.0) -> "GridSystem":
        """Grid wide enough for the infrared-excited and displaced wave packets."""
        half = padding * np.sqrt(3.0 / (2.0 * mass * omega)) + abs(displacement)
        return cls(mass=mass, omega=omega, ng=ng, q_min=-half, q_max=half)

    @cached_property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.ng

    @cached_property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.ng)

    @cached_property
    def p(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.ng, d=self.dq)

    @cached_property
    def kinetic_diag(self) -> np.ndarray:
        return self.p**2 / (2.0 * self.mass)

    @cached_property
    def potential_diag(self) -> np.ndarray:
        return 0.5 * self.mass * self.omega**2 * self.q**2

    def ground_width(self) -> float:
        return np.sqrt(1.0 / (2.0 * self.mass * self.omega))


def apply_kinetic(amps: np.ndarray, grid: GridSystem) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(amps, axis=1) * grid.kinetic_diag, axis=1)


def apply_grid_hamiltonian(amps: np.ndarray, grid: GridSystem) -> np.ndarray:
    return apply_kinetic(amps, grid) + amps * grid.potential_diag


def displace(amps: np.ndarray, grid: GridSystem, d: float) -> np.ndarray:
    """Exact translation by d via the momentum-space phase exp(-i p d)."""
    phase = np.exp(-1j * grid.p * d)
    return np.fft.ifft(np.fft.fft(amps, axis=1) * phase, axis=1)


def spin1_matrices() -> "dict[str, np.ndarray]":
    """Spin-1 operators in the (|+1>, |0>, |-1>) basis."""
    s = 1.0 / np.sqrt(2.0)
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], dtype=complex)
    sy = np.array([[0, -1j * s, 0], [1j * s, 0, -1j * s], [0, 1j * s, 0]])
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return {"x": sx, "y": sy, "z": sz}


def pseudo_spin_matrices() -> "dict[str, np.ndarray]":
    """Pseudo-spin-1/2 operators in the (|m_S=0>, |m_S=-1>) basis."""
    sx = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
    sy = np.array([[0, -0.5j], [0.5j, 0]], dtype=complex)
    sz = np.diag([0.5, -0.5]).astype(complex)
    return {"x": sx, "y": sy, "z": sz}


@dataclass
class NVSpec:
    """NV center in a bath of substitutional-nitrogen electron spins."""

    b_field: float                      # gauss, along z
    positions: np.ndarray               # (K, 3) bath-spin positions in nm
    d_splitting: float = constants.NV_SPLITTING_RAD_US
    g_center: float = 2.0
    g_bath: float = 2.0
    mu_b: float = constants.BOHR_MAGNETON_RAD_US_PER_G
    dipole_prefactor: float = constants.DIPOLE_RAD_US_NM3  # per unit g-factor pair
    reduced: bool = False

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if np.any(np.linalg.norm(self.positions, axis=1) == 0.0):
            raise ValueError("bath spin at the origin")

    @property
    def n_modes(self) -> int:
        return self.positions.shape[0]

    @cached_property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    @cached_property
    def unit_vectors(self) -> np.ndarray:
        return self.positions / self.radii[:, None]

    @cached_property
    def gamma_center(self) -> np.ndarray:
        """System-bath dipole strengths gamma_k (rad/us)."""
        return self.dipole_prefactor * self.g_center * self.g_bath / self.radii**3

    def pair_geometry(self):
        """(gamma_jk, n_jk) tables over bath pairs; diagonal entries zero."""
        k = self.n_modes
        gamma = np.zeros((k, k))
        units = np.zeros((k, k, 3))
        for j in range(k):
            for l in range(j + 1, k):
                r = self.positions[j] - self.positions[l]
                dist = np.linalg.norm(r)
                gamma[j, l] = gamma[l, j] = (
                    self.dipole_prefactor * self.g_bath**2 / dist**3)
                units[j, l] = r / dist
                units[l, j] = -r / dist
        return gamma, units

    def zeeman_bath(self) -> float:
        return self.g_bath * self.mu_b * self.b_field

    def zeeman_center(self) -> float:
        return self.g_center * self.mu_b * self.b_field


def sample_nv_geometry(n_modes: int, r_min: float, r_max: float,
                       seed: int) -> np.ndarray:
    """Bath-spin positions uniform in the spherical shell [r_min, r_max]."""
    if r_min <= 0 or r_max <= r_min:
        raise ValueError("need 0 < r_min < r_max")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    radii = (rng.uniform(r_min**3, r_max**3, size=n_modes)) ** (1.0 / 3.0)
    direction = rng.normal(size=(n_modes, 3))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    return direction * radii[:, None]


@dataclass
class SystemModel:
    kind: str                       # grid | nv_full | nv_reduced
    grid: "GridSystem | None" = None
    nv: "NVSpec | None" = None

    @classmethod
    def from_grid(cls, grid: GridSystem) -> "SystemModel":
        return cls(kind="grid", grid=grid)

    @classmethod
    def from_nv(cls, nv: NVSpec) -> "SystemModel":
        return cls(kind="nv_reduced" if nv.reduced else "nv_full", nv=nv)

    @property
    def n_sys(self) -> int:
        if self.kind == "grid":
            return self.grid.ng
        return 2 if self.kind == "nv_reduced" else 3

    def hamiltonian_matrix(self) -> np.ndarray:
        """Dense system Hamiltonian for the NV variants."""
        nv = self.nv
        if self.kind == "nv_full":
            sz = spin1_matrices()["z"]
            return nv.d_splitting * (sz @ sz) + nv.zeeman_center() * sz
        if self.kind == "nv_reduced":
            sz = pseudo_spin_matrices()["z"]
            shift = sz - 0.5 * np.eye(2)
            return nv.d_splitting * (shift @ shift) + nv.zeeman_center() * shift
        raise ValueError("grid systems have no dense Hamiltonian")

    def apply_hamiltonian(self, amps: np.ndarray) -> np.ndarray:
        if self.kind == "grid":
            return apply_grid_hamiltonian(amps, self.grid)
        return amps @ self.hamiltonian_matrix().T


def apply_system_hamiltonian(state: SpinorState, model: SystemModel) -> SpinorState:
    if state.n_sys != model.n_sys:
        raise ValueError("state system dimension does not match the model")
    return SpinorState(model.apply_hamiltonian(state.amps))


def embed_bath(system_amps: np.ndarray, n_modes: int,
               bath_index: int = 0) -> SpinorState:
    """Place a bare system wave function at a single bath configuration."""
    system_amps = np.asarray(system_amps, dtype=complex).ravel()
    amps = np.zeros((1 << n_modes, system_amps.size), dtype=complex)
    amps[bath_index] = system_amps
    return SpinorState(amps)


def random_bath_bits(n_modes: int, p_exc: float, rng: np.random.Generator) -> int:
    """Bath configuration with each mode independently excited with p_exc."""
    bits = rng.random(n_modes) < p_exc
    return basis_index(bits.astype(int))


def nv_system_amps(model: SystemModel, which: str) -> np.ndarray:
    """Initial NV system vectors: excited |m_S=-1> or the 0/-1 superposition."""
    if model.kind == "nv_full":
        states = {"minus_one": np.array([0, 0, 1.0]),
                  "ground": np.array([0, 1.0, 0]),
                  "superposition": np.array([0, 1.0, 1.0]) / np.sqrt(2)}
    else:
        states = {"minus_one": np.array([0, 1.0]),
                  "ground": np.array([1.0, 0]),
                  "superposition": np.array([1.0, 1.0]) / np.sqrt(2)}
    try:
        return states[which].astype(complex)
    except KeyError:
        raise ValueError(f"unknown NV system state {which!r}") from None


def prepare_state(model: SystemModel, ground: SpinorState, *,
                  excitation: str = "none", displacement: float = 0.0,
                  bath_init: str = "keep", p_exc: float = 0.5,
                  rng: "np.random.Generator | None" = None,
                  n_modes: "int | None" = None) -> SpinorState:
    """Build an initial state from a ground state.

    `ground` is either the coupled ground spinor (bath_init="keep") or a bare
    system state of shape (1, n_sys) to be combined with a vacuum or randomly
    excited bath. Excitations: none | infrared | displaced | displaced_infrared.
    """
    if model.kind != "grid" and excitation != "none":
        raise UnsupportedExcitationError(
            f"excitation {excitation!r} is only defined for grid systems")
    if bath_init == "keep":
        state = ground
    elif bath_init == "vacuum":
        state = embed_bath(ground.amps[0], n_modes or ground.n_modes, 0)
    elif bath_init == "random_product":
        if rng is None:
            raise ValueError("random_product bath needs an RNG")
        index = random_bath_bits(n_modes or ground.n_modes, p_exc, rng)
        state = embed_bath(ground.amps[0], n_modes or ground.n_modes, index)
    else:
        raise ValueError(f"unknown bath init {bath_init!r}")

    amps = state.amps
    if excitation in ("infrared", "displaced_infrared"):
        amps = amps * model.grid.q
    if excitation in ("displaced", "displaced_infrared"):
        amps = displace(amps, model.grid, displacement)
    return SpinorState(amps).normalized()
