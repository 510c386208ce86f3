"""Spin-bath decoherence simulator.

A grid-based harmonic oscillator or NV-center spin coupled to a finite bath
of two-level systems, propagated matrix-free with short-iterative Lanczos,
with stochastic bath-spin replacement and an exact arrowhead-matrix solution
of the rotating-wave boson model for cross-validation.
"""

from .bath import (BathSpec, SpinorState, apply_bath_hamiltonian, apply_mode_op,
                   apply_pair_hop, coupling_constants, density_of_states,
                   sample_spectrum)
from .hamiltonian import (TotalHamiltonian, build_dephasing_hamiltonian,
                          build_dissipation_hamiltonian, build_nv_hamiltonian,
                          commutator_residual)
from .propagate import (PropagatorConfig, ZenoReport, evolve_real,
                        ground_state_imaginary_time, zeno_time)
from .systems import (GridSystem, NVSpec, SystemModel, apply_system_hamiltonian,
                      prepare_state, sample_nv_geometry)

__version__ = "0.1.0"
