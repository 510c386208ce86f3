"""Configuration-driven experiment runner for the five shipped scenarios.

Scenarios are described by nested key-value configs (YAML files in
spinbath/data, overridable key by key). A run produces averaged and
per-realization trajectories on a fixed frame grid and can emit them as CSV
with one metadata sidecar per run recording the fully resolved config.
Given a seed, output is byte-identical regardless of the thread count.
"""

from __future__ import annotations

import copy
import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__, constants
from .bath import BathSpec, SpinorState
from .boson import ArrowheadModel, decompose, r_envelope, u00
from .hamiltonian import (TotalHamiltonian, build_dephasing_hamiltonian,
                          build_dissipation_hamiltonian, build_nv_hamiltonian)
from .observables import (coherence_l1, ladder_mean, nv_spin_std,
                          partial_trace_bath, purity, ratio_series,
                          survival_probability)
from .propagate import (PropagatorConfig, ground_state_imaginary_time,
                        zeno_time)
from .swap import SwapPolicy, ensemble_run
from .systems import (GridSystem, NVSpec, SystemModel, embed_bath,
                      nv_system_amps, prepare_state, sample_nv_geometry)

SCENARIOS = ("fig2", "fig3", "fig4", "fig5", "fig6", "custom")

CSV_COLUMNS = ["t", "E_S", "E_B", "E_SB", "q_mean", "p_mean", "dq", "dp",
               "lagrangian", "coherence", "purity", "ratio_R", "survival"]
NV_EXTRA_COLUMNS = ["nv_sx_std", "nv_sz_std"]
ENVELOPE_COLUMNS = ["t", "u00_abs", "r_envelope"]


class ConfigError(ValueError):
    """Scenario configuration rejected before any compute."""


@dataclass
class ValidationReport:
    errors: "list[str]" = field(default_factory=list)
    warnings: "list[str]" = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def default_config(scenario: str) -> dict:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if scenario == "custom":
        return {"scenario": "custom"}
    text = importlib.resources.files("spinbath.data").joinpath(
        f"{scenario}.yaml").read_text()
    return yaml.safe_load(text)


def merge_config(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(config: dict, assignments: "list[str]") -> dict:
    """Apply dotted-path `key=value` overrides with YAML-parsed values."""
    out = copy.deepcopy(config)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, _, raw = item.partition("=")
        value = yaml.safe_load(raw)
        node = out
        keys = path.strip().split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {path!r}")
        node[keys[-1]] = value
    return out


# --- building blocks ---------------------------------------------------------

def _grid_from_config(config: dict) -> GridSystem:
    sys_cfg = config["system"]
    displacement = abs(config.get("initial", {}).get("displacement", 0.0))
    return GridSystem.for_oscillator(
        mass=float(sys_cfg["mass"]), omega=float(sys_cfg["omega"]),
        ng=int(sys_cfg.get("ng", 128)),
        displacement=displacement, padding=float(sys_cfg.get("padding", 6.0)))


def _bath_from_config(config: dict, eps_min: "float | None" = None) -> BathSpec:
    bath_cfg = config["bath"]
    return BathSpec.sample(
        eps0=float(bath_cfg["eps_min"] if eps_min is None else eps_min),
        eps_c=float(bath_cfg["eps_max"]),
        n_modes=int(bath_cfg["modes"]),
        eta=float(bath_cfg.get("eta", 0.0)))


def _nv_from_config(config: dict) -> NVSpec:
    sys_cfg = config["system"]
    geo = sys_cfg.get("geometry", {})
    positions = sample_nv_geometry(
        n_modes=int(config["bath"]["modes"]),
        r_min=float(geo.get("r_min", 3.0)), r_max=float(geo.get("r_max", 5.5)),
        seed=int(geo.get("seed", config.get("seed", 0))))
    return NVSpec(
        b_field=float(sys_cfg["b_field"]), positions=positions,
        d_splitting=constants.TWO_PI * float(sys_cfg.get("d_splitting_mhz", 2870.0)),
        g_center=float(sys_cfg.get("g_center", 2.0)),
        g_bath=float(sys_cfg.get("g_bath", 2.0)),
        reduced=(sys_cfg.get("model", "full") == "reduced"))


def _hamiltonian_from_config(config: dict,
                             eps_min: "float | None" = None) -> TotalHamiltonian:
    kind = config["system"]["kind"]
    if kind == "grid":
        grid = _grid_from_config(config)
        bath = _bath_from_config(config, eps_min)
        coupling = config["coupling"]
        if coupling["kind"] == "dipolar":
            return build_dissipation_hamiltonian(grid, bath,
                                                 scenario=config["scenario"])
        if coupling["kind"] == "dephasing":
            return build_dephasing_hamiltonian(
                grid, bath, strength=float(coupling["strength"]),
                sigma_eps=float(coupling["sigma_eps"]),
                exponent_sign=int(coupling.get("exponent_sign", -1)),
                scenario=config["scenario"])
        raise ConfigError(f"unknown coupling kind {coupling['kind']!r}")
    if kind == "nv":
        return build_nv_hamiltonian(_nv_from_config(config),
                                    scenario=config["scenario"])
    raise ConfigError(f"unknown system kind {kind!r}")


def _propagator_config(config: dict) -> PropagatorConfig:
    prop = config.get("propagator", {})
    try:
        return PropagatorConfig(
            dt=float(prop.get("dt", 0.1)), tol=float(prop.get("tol", 1e-9)),
            krylov_dim_max=int(prop.get("krylov_dim_max", 30)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_times(config: dict) -> "tuple[float, float]":
    omega = float(config["system"].get("omega", 1.0))
    period = 2.0 * np.pi / omega
    if "t_final_periods" in config:
        t_final = float(config["t_final_periods"]) * period
    else:
        t_final = float(config["t_final"])
    if "frames_per_period" in config:
        frame_dt = period / float(config["frames_per_period"])
    else:
        frame_dt = float(config["frame_dt"])
    return t_final, frame_dt


def _grid_ground_state(hamiltonian: TotalHamiltonian, config: dict,
                       prop: PropagatorConfig) -> SpinorState:
    """Ground state of the bare system or of the total Hamiltonian."""
    grid = hamiltonian.model.grid
    gaussian = np.exp(-grid.mass * grid.omega * grid.q**2 / 2.0).astype(complex)
    gaussian /= np.linalg.norm(gaussian)
    which = config["initial"].get("ground", "total")
    relax_cfg = PropagatorConfig(dt=0.4 / grid.omega,
                                 tol=prop.tol, krylov_dim_max=prop.krylov_dim_max)
    if which == "bare":
        seed = SpinorState(gaussian[None, :])
        state, _ = ground_state_imaginary_time(
            lambda a: hamiltonian.model.apply_hamiltonian(a), seed, relax_cfg)
        return state
    if which == "total":
        n_modes = hamiltonian.bath.n_modes
        seed = embed_bath(gaussian, n_modes, 0)
        state, _ = ground_state_imaginary_time(hamiltonian.apply, seed, relax_cfg)
        return state
    raise ConfigError(f"unknown ground-state choice {which!r}")


def _initial_state_factory(hamiltonian: TotalHamiltonian, config: dict,
                           prop: PropagatorConfig):
    """Returns f(realization, rng) -> SpinorState plus a representative state."""
    kind = config["system"]["kind"]
    bath_cfg = config["bath"]
    init = bath_cfg.get("init", "vacuum")
    p_exc = float(bath_cfg.get("p_exc", 0.5))
    n_modes = int(bath_cfg["modes"])

    if kind == "grid":
        initial_cfg = config["initial"]
        ground = _grid_ground_state(hamiltonian, config, prop)
        excitation = initial_cfg.get("excitation", "none")
        displacement = float(initial_cfg.get("displacement", 0.0))

        if init == "vacuum" and ground.amps.shape[0] == 1:
            bath_init = "vacuum"
        elif init == "vacuum":
            bath_init = "keep"
        elif init == "random_product":
            if ground.amps.shape[0] != 1:
                raise ConfigError(
                    "random_product bath requires a bare-system ground state")
            bath_init = "random_product"
        else:
            raise ConfigError(f"unknown bath init {init!r}")

        def factory(_r: int, rng: np.random.Generator) -> SpinorState:
            return prepare_state(
                hamiltonian.model, ground, excitation=excitation,
                displacement=displacement, bath_init=bath_init,
                p_exc=p_exc, rng=rng, n_modes=n_modes)

        representative = factory(0, np.random.default_rng(int(config.get("seed", 0))))
        return factory, representative

    system_init = config["system"].get("init", "minus_one")
    system_amps = nv_system_amps(hamiltonian.model, system_init)

    def factory(_r: int, rng: np.random.Generator) -> SpinorState:
        bare = SpinorState(system_amps[None, :])
        return prepare_state(hamiltonian.model, bare, bath_init=init,
                             p_exc=p_exc, rng=rng, n_modes=n_modes)

    representative = factory(0, np.random.default_rng(int(config.get("seed", 0))))
    return factory, representative


def _frame_measure(hamiltonian: TotalHamiltonian, initial: SpinorState):
    """Per-frame linear moments plus the reduced density matrix."""
    model = hamiltonian.model
    grid = model.grid

    def measure(t: float, state: SpinorState):
        a = state.amps
        rho = np.einsum("si,sj->ij", a, a.conj())
        rec = {
            "e_s": float(np.vdot(a, hamiltonian.apply_system(a)).real),
            "e_b": float(np.vdot(a, hamiltonian.apply_bath(a)).real),
            "e_sb": float(np.vdot(a, hamiltonian.apply_coupling(a)).real),
            "survival": survival_probability(initial, state),
            "rho": rho,
        }
        if grid is not None:
            weights = np.einsum("si,si->i", a.conj(), a).real
            total = weights.sum()
            a_k = np.fft.fft(a, axis=1)
            weights_k = np.einsum("si,si->i", a_k.conj(), a_k).real
            total_k = weights_k.sum()
            rec["q_mean"] = float(grid.q @ weights / total)
            rec["q2_mean"] = float((grid.q**2) @ weights / total)
            rec["p_mean"] = float(grid.p @ weights_k / total_k)
            rec["p2_mean"] = float((grid.p**2) @ weights_k / total_k)
        return rec

    return measure


@dataclass
class RunResult:
    label: str
    kind: str                      # trajectory | envelope
    times: np.ndarray
    table: "dict[str, np.ndarray]"
    realization_tables: "list[dict[str, np.ndarray]]" = field(default_factory=list)
    info: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    config: dict
    runs: "list[RunResult]"

    def run(self, label: str) -> RunResult:
        for r in self.runs:
            if r.label == label:
                return r
        raise KeyError(label)


def _frames_to_table(times: np.ndarray, frames: "list[dict]",
                     hamiltonian: TotalHamiltonian) -> "dict[str, np.ndarray]":
    """Assemble the CSV-facing columns from (possibly averaged) frame records."""
    model = hamiltonian.model
    grid = model.grid
    n = len(frames)

    def pull(key):
        return np.array([float(np.real(fr[key])) for fr in frames])

    table: "dict[str, np.ndarray]" = {"t": times.copy()}
    table["E_S"] = pull("e_s")
    table["E_B"] = pull("e_b")
    table["E_SB"] = pull("e_sb")
    table["survival"] = pull("survival")

    rhos = [np.asarray(fr["rho"]) for fr in frames]
    table["purity"] = np.array([purity(r) for r in rhos])
    if grid is not None:
        table["q_mean"] = pull("q_mean")
        table["p_mean"] = pull("p_mean")
        q2 = pull("q2_mean")
        p2 = pull("p2_mean")
        table["dq"] = np.sqrt(np.maximum(q2 - table["q_mean"]**2, 0.0))
        table["dp"] = np.sqrt(np.maximum(p2 - table["p_mean"]**2, 0.0))
        table["lagrangian"] = p2 / (2.0 * grid.mass) - \
            0.5 * grid.mass * grid.omega**2 * q2
        table["coherence"] = np.array(
            [coherence_l1(r, "grid", grid.dq) for r in rhos])
        a_mean = np.array([ladder_mean(q, p, grid.mass, grid.omega)
                           for q, p in zip(table["q_mean"], table["p_mean"])])
        try:
            table["ratio_R"] = ratio_series(table["E_S"], a_mean)
        except ValueError:
            table["ratio_R"] = np.full(n, np.nan)
    else:
        table["coherence"] = np.array([coherence_l1(r, "discrete") for r in rhos])
        stds = [nv_spin_std(r, model) for r in rhos]
        table["nv_sx_std"] = np.array([s[0] for s in stds])
        table["nv_sz_std"] = np.array([s[1] for s in stds])
        table["populations"] = np.stack([np.diag(r).real for r in rhos])
    return table


def _run_single(hamiltonian: TotalHamiltonian, config: dict, label: str,
                threads: int, eps_min: "float | None" = None) -> "list[RunResult]":
    prop = _propagator_config(config)
    t_final, frame_dt = _resolve_times(config)
    factory, representative = _initial_state_factory(hamiltonian, config, prop)
    measure = _frame_measure(hamiltonian, representative)

    swap_cfg = config.get("swap", {})
    ensemble_cfg = config.get("ensemble", {})
    n_real = int(ensemble_cfg.get("realizations", 1))
    swaps_enabled = bool(swap_cfg.get("enabled", False))

    info: dict = {"scenario": config["scenario"], "label": label}
    interval = float("inf")
    if swaps_enabled:
        interval = swap_cfg.get("interval", "auto")
        if interval == "auto":
            report = zeno_time(representative, hamiltonian.apply)
            interval = float(swap_cfg.get("interval_factor", 0.1)) * report.t_z
            info["zeno_time"] = report.t_z
        interval = float(interval)
        info["swap_interval"] = interval

    policy = SwapPolicy(
        interval=interval if swaps_enabled else max(t_final, 1.0),
        target_rule=swap_cfg.get("target_rule", "uniform_random"),
        fresh_spin=tuple(swap_cfg.get("fresh_spin", [1.0, 0.0])),
        n_realizations=n_real, seed=int(config.get("seed", 0)),
        mode=swap_cfg.get("mode", "projective"))

    result = ensemble_run(factory, hamiltonian.apply, policy, t_final, prop,
                          measure, frame_dt, threads=threads,
                          swaps_enabled=swaps_enabled)
    if result.failures:
        info["failed_realizations"] = [int(i) for i, _ in result.failures]

    runs = [RunResult(
        label=label, kind="trajectory", times=result.times,
        table=_frames_to_table(result.times, result.averaged, hamiltonian),
        realization_tables=[
            _frames_to_table(result.times, frames, hamiltonian)
            for frames in result.realizations] if n_real > 1 else [],
        info=info)]

    if swaps_enabled and bool(swap_cfg.get("include_reference", False)):
        ref = ensemble_run(factory, hamiltonian.apply, policy, t_final, prop,
                           measure, frame_dt, threads=threads,
                           swaps_enabled=False)
        runs.append(RunResult(
            label=f"{label}_ref", kind="trajectory", times=ref.times,
            table=_frames_to_table(ref.times, ref.averaged, hamiltonian),
            info={**info, "label": f"{label}_ref", "reference": True}))
    return runs


def _envelope_run(hamiltonian: TotalHamiltonian, config: dict, label: str,
                  times: np.ndarray, h_s0: float) -> RunResult:
    grid = hamiltonian.model.grid
    model = ArrowheadModel.from_bath(hamiltonian.bath, grid.mass, grid.omega)
    decomp = decompose(model)
    return RunResult(
        label=label, kind="envelope", times=times.copy(),
        table={"t": times.copy(),
               "u00_abs": np.abs(u00(decomp, times)),
               "r_envelope": r_envelope(decomp, times, h_s0, grid.omega)},
        info={"scenario": config["scenario"], "label": label, "h_s0": h_s0})


def run_scenario(config: dict, threads: int = 1) -> ScenarioResult:
    """Execute a resolved scenario config; deterministic for a given seed."""
    report = validate_config(config)
    if not report.ok:
        raise ConfigError("; ".join(report.errors))
    config = copy.deepcopy(config)
    stem = config.get("output", {}).get("stem", config["scenario"])

    runs: "list[RunResult]" = []
    sweep = config.get("sweep", {})
    if "eps_min" in sweep:
        for eps_min in sweep["eps_min"]:
            hamiltonian = _hamiltonian_from_config(config, eps_min=float(eps_min))
            label = f"{stem}_eps0_{eps_min:g}"
            sub = _run_single(hamiltonian, config, label, threads,
                              eps_min=float(eps_min))
            runs.extend(sub)
            if config.get("analytic_envelope", False):
                runs.append(_envelope_run(
                    hamiltonian, config, f"{label}_env", sub[0].times,
                    h_s0=float(sub[0].table["E_S"][0])))
    elif "modes" in sweep:
        for modes in sweep["modes"]:
            sub_config = merge_config(config, {"bath": {"modes": int(modes)}})
            hamiltonian = _hamiltonian_from_config(sub_config)
            runs.extend(_run_single(hamiltonian, sub_config,
                                    f"{stem}_K{modes}", threads))
    else:
        hamiltonian = _hamiltonian_from_config(config)
        runs.extend(_run_single(hamiltonian, config, stem, threads))
    return ScenarioResult(config=config, runs=runs)


# --- validation ---------------------------------------------------------------

def validate_config(config: dict) -> ValidationReport:
    """Static checks; errors abort before compute, warnings do not."""
    report = ValidationReport()
    scenario = config.get("scenario")
    if scenario not in SCENARIOS:
        report.errors.append(f"unknown scenario {scenario!r}")
        return report
    if "system" not in config or "bath" not in config:
        report.errors.append("config needs 'system' and 'bath' sections")
        return report

    bath_cfg = config["bath"]
    n_modes = int(bath_cfg.get("modes", 0))
    if n_modes < 1:
        report.errors.append("bath needs at least one mode")
    if "eps_max" in bath_cfg and n_modes >= 2:
        eps_min = float(bath_cfg.get("eps_min", 0.0))
        sweep = config.get("sweep", {})
        eps_mins = [float(x) for x in sweep.get("eps_min", [eps_min])]
        for value in eps_mins:
            if float(bath_cfg["eps_max"]) <= value:
                report.errors.append(
                    f"cutoff energy {bath_cfg['eps_max']} must exceed the "
                    f"band bottom {value}")

    kind = config["system"].get("kind")
    if kind == "grid":
        try:
            grid = _grid_from_config(config)
        except (KeyError, ValueError) as exc:
            report.errors.append(f"grid system: {exc}")
            grid = None
        if grid is not None:
            width = grid.ground_width()
            displacement = abs(config.get("initial", {}).get("displacement", 0.0))
            needed = 8.0 * width + 2.0 * displacement
            if grid.q_max - grid.q_min < needed:
                report.warnings.append(
                    f"grid covers {grid.q_max - grid.q_min:.3g} but the wave "
                    f"packet needs about {needed:.3g}")
    elif kind == "nv":
        try:
            nv = _nv_from_config(config)
        except (KeyError, ValueError) as exc:
            report.errors.append(f"nv system: {exc}")
            nv = None
        if nv is not None:
            gamma_pairs, _ = nv.pair_geometry()
            strongest = max(float(nv.gamma_center.max()),
                            float(gamma_pairs.max()) if nv.n_modes > 1 else 0.0)
            if nv.reduced and nv.zeeman_bath() < 10.0 * strongest:
                report.warnings.append(
                    "strong-field condition violated: g mu_B B = "
                    f"{nv.zeeman_bath():.3g} is below 10x the largest dipole "
                    f"coupling {strongest:.3g}")
    else:
        report.errors.append(f"unknown system kind {kind!r}")

    try:
        _propagator_config(config)
    except ConfigError as exc:
        report.errors.append(str(exc))

    swap_cfg = config.get("swap", {})
    if swap_cfg.get("enabled", False):
        interval = swap_cfg.get("interval", "auto")
        if interval != "auto" and scenario in ("fig4", "fig6"):
            try:
                hamiltonian = _hamiltonian_from_config(config)
                prop = _propagator_config(config)
                _, representative = _initial_state_factory(hamiltonian, config, prop)
                t_z = zeno_time(representative, hamiltonian.apply).t_z
                if float(interval) > t_z:
                    report.warnings.append(
                        f"Zeno condition violated: swap interval {interval} "
                        f"exceeds the Zeno time {t_z:.3g}")
            except ConfigError as exc:
                report.errors.append(str(exc))
    return report


# --- CSV / sidecar emission ----------------------------------------------------

def _format_value(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return ""
    return f"{value:.17g}"


def table_to_csv(table: "dict[str, np.ndarray]", kind: str = "trajectory",
                 nv: bool = False) -> str:
    if kind == "envelope":
        columns = ENVELOPE_COLUMNS
    else:
        columns = CSV_COLUMNS + (NV_EXTRA_COLUMNS if nv else [])
    lines = [",".join(columns)]
    n = len(table["t"])
    for i in range(n):
        row = []
        for col in columns:
            series = table.get(col)
            row.append(_format_value(series[i]) if series is not None else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_outputs(result: ScenarioResult, out_dir) -> "list[str]":
    """Emit per-run CSVs plus one sidecar per run stem; returns written paths."""
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nv = result.config["system"]["kind"] == "nv"
    written = []
    for run in result.runs:
        path = out / f"{run.label}.csv"
        path.write_text(table_to_csv(run.table, run.kind, nv=nv))
        written.append(str(path))
        for index, table in enumerate(run.realization_tables):
            rpath = out / f"{run.label}_r{index:03d}.csv"
            rpath.write_text(table_to_csv(table, run.kind, nv=nv))
            written.append(str(rpath))

    stem = result.config.get("output", {}).get("stem", result.config["scenario"])
    sidecar = out / f"{stem}.meta.yaml"
    sidecar.write_text(yaml.safe_dump({
        "code_version": __version__,
        "seed": int(result.config.get("seed", 0)),
        "resolved_config": result.config,
        "files": [str(p) for p in written],
        "run_info": {run.label: _plain(run.info) for run in result.runs},
    }, sort_keys=True))
    written.append(str(sidecar))
    return written


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def read_sidecar(path) -> dict:
    with open(path) as handle:
        return yaml.safe_load(handle)
