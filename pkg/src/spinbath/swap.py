"""Stochastic bath-spin replacement and seeded ensemble orchestration.

The branching swap ("full"/"phase_only") pairs amplitudes over the swapped
bit and gives the rest factor the branch-averaged log-amplitude (the complex
geometric mean of the two conditionals, principal logs, zeros clamped to
1e-30); the fresh spin is imposed on the swapped bit, so the result is a
tensor product across the (mode k) x (rest, system) cut. Averaging phases
pointwise is fine for discrete system spaces but injects kinetic energy into
grid wave functions (sign structure turns into phase walls), so the swap
scenarios default to "projective": collapse the swapped spin with Born
weights using the realization's RNG, then impose the fresh spin. Its
ensemble average is the exact trace-and-replace bath refresh.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .bath import InvalidModeError, SpinorState

LOG_CLAMP = 1e-30

Measure = Callable[[float, SpinorState], "Mapping[str, float | np.ndarray]"]


class AllZeroAmplitudesError(ValueError):
    """Branching phases requested for an all-zero amplitude vector."""


@dataclass(frozen=True)
class BranchingPhases:
    """Log-amplitude representation a_s = c + log lambda_s with sum(a) = 0."""

    a: np.ndarray
    c_shift: complex


def _clamped_log(values: np.ndarray) -> np.ndarray:
    mag = np.maximum(np.abs(values), LOG_CLAMP)
    return np.log(mag) + 1j * np.angle(values)


def phases_from_amplitudes(amplitudes: np.ndarray) -> BranchingPhases:
    """Relative phases of a normalized amplitude vector, gauge sum(a_s) = 0."""
    amplitudes = np.asarray(amplitudes, dtype=complex).ravel()
    if not np.any(amplitudes):
        raise AllZeroAmplitudesError("cannot take phases of the zero vector")
    logs = _clamped_log(amplitudes)
    c = -np.mean(logs)
    return BranchingPhases(a=logs + c, c_shift=c)


def amplitudes_from_phases(phases: BranchingPhases) -> np.ndarray:
    """Inverse of phases_from_amplitudes (exact away from clamped zeros)."""
    return np.exp(phases.a - phases.c_shift)


def _split_indices(n_components: int, k: int) -> "tuple[np.ndarray, np.ndarray]":
    bit = 1 << (k - 1)
    idx = np.arange(n_components)
    low = idx[(idx & bit) == 0]
    return low, low | bit


def swap_spin(state: SpinorState, k: int, fresh_spin, mode: str = "full",
              rng: "np.random.Generator | None" = None) -> SpinorState:
    """Replace bath spin k by fresh_spin = (amp|0>, amp|1>), keeping the rest.

    mode="full" imposes the fresh amplitudes on the branch-averaged rest
    factor and renormalizes; the swapped spin factorizes exactly.
    mode="phase_only" only overwrites the imaginary part of the conditional
    coefficients, preserving every component magnitude (and the norm), but
    cannot de-excite a spin. mode="projective" collapses the swapped spin
    with Born weights (needs rng) before imposing the fresh spin.
    """
    if not 1 <= k <= state.n_modes:
        raise InvalidModeError(f"mode {k} outside 1..{state.n_modes}")
    fresh = np.asarray(fresh_spin, dtype=complex).ravel()
    if fresh.shape != (2,):
        raise ValueError("fresh_spin must be a two-component qubit")
    norm = np.linalg.norm(fresh)
    if norm == 0.0:
        raise ValueError("fresh_spin must be normalizable")
    fresh = fresh / norm

    low, high = _split_indices(state.amps.shape[0], k)
    lam0 = state.amps[low]
    lam1 = state.amps[high]
    out = np.empty_like(state.amps)

    if mode == "projective":
        if rng is None:
            raise ValueError("projective swaps need an RNG for the Born draw")
        w0 = float(np.sum(np.abs(lam0) ** 2))
        w1 = float(np.sum(np.abs(lam1) ** 2))
        total = w0 + w1
        if total == 0.0:
            raise ValueError("cannot swap a spin of the zero state")
        branch = lam1 if rng.random() < w1 / total else lam0
        rest = branch / np.linalg.norm(branch)
        out[low] = rest * fresh[0]
        out[high] = rest * fresh[1]
        return SpinorState(out)

    log0 = _clamped_log(lam0)
    log1 = _clamped_log(lam1)
    branch_mean = 0.5 * (log0 + log1)
    if mode == "full":
        rest = np.exp(branch_mean)
        out[low] = rest * fresh[0]
        out[high] = rest * fresh[1]
        return SpinorState(out).normalized()
    if mode == "phase_only":
        conditional = 0.5 * (log0 - log1)
        fresh_coeff = 0.5 * (_clamped_log(fresh[:1]) - _clamped_log(fresh[1:]))[0]
        new_conditional = conditional.real + 1j * fresh_coeff.imag
        out[low] = np.exp(branch_mean + new_conditional)
        out[high] = np.exp(branch_mean - new_conditional)
        return SpinorState(out)
    raise ValueError(f"unknown swap mode {mode!r}")


@dataclass
class SwapPolicy:
    """Swap schedule and ensemble parameters."""

    interval: float
    target_rule: str = "uniform_random"     # | round_robin
    fresh_spin: "tuple[complex, complex]" = (1.0, 0.0)
    n_realizations: int = 1
    seed: int = 0
    mode: str = "full"

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("swap interval must be positive")
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")
        if self.target_rule not in ("uniform_random", "round_robin"):
            raise ValueError(f"unknown target rule {self.target_rule!r}")
        if self.mode not in ("full", "phase_only", "projective"):
            raise ValueError(f"unknown swap mode {self.mode!r}")


@dataclass
class EnsembleResult:
    times: np.ndarray
    averaged: "list[dict[str, float | np.ndarray]]"
    realizations: "list[list[dict[str, float | np.ndarray]]]"
    failures: "list[tuple[int, Exception]]" = field(default_factory=list)


def _run_realization(index: int, seed_seq: np.random.SeedSequence,
                     initial_factory, apply_h, policy: SwapPolicy,
                     t_final: float, config, measure: Measure,
                     frame_times: np.ndarray, swaps_enabled: bool):
    from .propagate import evolve_real  # local import avoids a cycle

    rng = np.random.default_rng(seed_seq)
    state = initial_factory(index, rng).normalized()
    records = [dict(measure(0.0, state))]

    if swaps_enabled:
        n_swaps = int(np.floor(t_final / policy.interval + 1e-9))
        swap_times = policy.interval * np.arange(1, n_swaps + 1)
    else:
        swap_times = np.array([])
    events = sorted(
        [(float(t), "frame") for t in frame_times[1:]] +
        [(float(t), "swap") for t in swap_times])

    n_modes = state.n_modes
    swap_count = 0
    t = 0.0
    for t_event, kind in events:
        if t_event > t + 1e-12 * max(1.0, t_final):
            state = evolve_real(state, apply_h, t_event - t, config)
            t = t_event
        if kind == "frame":
            records.append(dict(measure(t, state)))
        else:
            if policy.target_rule == "uniform_random":
                target = int(rng.integers(1, n_modes + 1))
            else:
                target = swap_count % n_modes + 1
            state = swap_spin(state, target, policy.fresh_spin, policy.mode, rng=rng)
            swap_count += 1
    return records


def ensemble_run(initial_factory: "Callable[[int, np.random.Generator], SpinorState]",
                 apply_h, policy: SwapPolicy, t_final: float, config,
                 measure: Measure, frame_dt: float, *, threads: int = 1,
                 swaps_enabled: bool = True) -> EnsembleResult:
    """Average seeded swap realizations over a fixed observation grid.

    Per-realization RNG streams derive from (policy.seed, realization index);
    the reduction runs in realization order, so results do not depend on the
    thread count.
    """
    n_frames = max(1, int(round(t_final / frame_dt)))
    frame_times = np.linspace(0.0, t_final, n_frames + 1)
    streams = np.random.SeedSequence(policy.seed).spawn(policy.n_realizations)

    def job(r):
        return _run_realization(r, streams[r], initial_factory, apply_h, policy,
                                t_final, config, measure, frame_times,
                                swaps_enabled)

    results: "list[list[dict] | None]" = [None] * policy.n_realizations
    failures: "list[tuple[int, Exception]]" = []
    if threads > 1 and policy.n_realizations > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {r: pool.submit(job, r) for r in range(policy.n_realizations)}
        for r in range(policy.n_realizations):
            try:
                results[r] = futures[r].result()
            except Exception as exc:  # noqa: BLE001 - reported, not silenced
                failures.append((r, exc))
    else:
        for r in range(policy.n_realizations):
            try:
                results[r] = job(r)
            except Exception as exc:  # noqa: BLE001
                failures.append((r, exc))

    survivors = [res for res in results if res is not None]
    if not survivors:
        raise RuntimeError(f"all {policy.n_realizations} realizations failed: "
                           f"{failures[0][1]!r}")

    averaged = []
    for frame in range(len(frame_times)):
        acc: "dict[str, float | np.ndarray]" = {}
        for res in survivors:
            for key, value in res[frame].items():
                if key in acc:
                    acc[key] = acc[key] + value
                else:
                    acc[key] = np.array(value, dtype=complex) \
                        if isinstance(value, np.ndarray) else value
        for key in acc:
            acc[key] = acc[key] / len(survivors)
        averaged.append(acc)
    return EnsembleResult(times=frame_times, averaged=averaged,
                          realizations=survivors, failures=failures)
