"""Experiment orchestration: configuration, the frame loop, comparisons, sweeps.

One experiment is a sequence of frames.  Every frame the devices (possibly)
move, channels are redrawn, an optional scheduling pass deactivates expensive
devices, energy flows are settled with the per-server optimal transfer
budget, the active devices take one local training pass, and the two-tier
aggregation refreshes the global model.  Comparisons run several policies on
identical seeds and channels so that cost differences are attributable to the
policy alone.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
import typing
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fl, topology
from .association import (
    Association,
    DataSplit,
    EnergyScenario,
    bfs_optimal,
    dhda_trigger,
    dhda_update,
    divergence,
    frame_energy_step,
    h2rma_associate,
    initial_ranges,
    random_associate,
    schedule_devices,
)
from .channel import bd_gains, sample_rician
from .energy import EnergyLedger, compute_energy

POLICIES = ("bfs", "h2rma", "random")
SCHEDULING_MODES = ("off", "heuristic", "random")
MOBILITY_MODES = ("off", "hmm")
SWEEPABLE = {"K": "K", "M": "M", "E_th": "e_th", "B_0": "B_0"}

# Config keys that may appear under an alternative spelling.
CONFIG_ALIASES = {"lambda": "bandwidth"}


class ConfigError(ValueError):
    """Raised for malformed configuration input."""


@dataclass
class SimConfig:
    """Complete description of one experiment (reference defaults).

    Antenna counts, device/server counts, batteries, pathloss exponent,
    bandwidth, CPU parameters, the divergence cap, cell radius, circuit
    power, and the noise floor follow the reference deployment; everything
    else (model size, rate targets, mobility kinematics, learning task) is an
    explicit knob with a documented default.
    """

    # network dimensions
    N_cu: int = 128
    N_mec: int = 16
    M: int = 8
    K: int = 20
    L: int = 50
    C: int = 10
    # energy and radio
    B_max: float = 1000.0
    B_0: float = 200.0
    nu: float = 3.7
    bandwidth: float = 20e6
    vartheta: float = 1e9
    omega: float = 40.0
    varsigma: float = 1e-27
    theta_max: float = 0.5
    cell_radius: float = 200.0
    circuit_power_dbm: float = 30.0
    circuit_time: float = 0.01
    noise_psd_dbm: float = -174.0
    Q_bits: float = 3.2e8
    r_dev: float = 0.0  # 0 -> one bit per channel use (rate = bandwidth)
    r_mec: float = 0.0
    rician_k: float = 10.0
    alpha: float = 1.0
    # policy switches
    policy: str = "h2rma"
    scheduling: str = "off"
    mobility: str = "off"
    dhda: bool = False
    frozen_channels: bool = False
    e_th: float = 0.0  # 0 -> percentile rule
    e_th_percentile: float = 75.0
    seed: int = 0
    fl_enabled: bool = True
    # learning task
    d_features: int = 16
    classes_per_device: int = 2
    samples_per_device: int = 40
    split_concentration: float = 0.0
    class_sep: float = 3.0
    noise_std: float = 1.0
    test_per_class: int = 50
    lr: float = 0.1
    local_epochs: int = 1
    batch_size: int = 32
    # mobility kinematics
    mu_cell: float = 10.0
    T_frame: float = 1.0
    v_normal: float = 0.5
    v_risky: float = 1.5
    gamma_shape: float = 2.0
    p_stay: float = 0.8

    @property
    def sigma2(self) -> float:
        """Receiver noise power in watts over the full bandwidth."""
        return 10.0 ** ((self.noise_psd_dbm - 30.0) / 10.0) * self.bandwidth

    @property
    def e_cir(self) -> float:
        """Fixed circuit energy per frame (power in dBm times on-time)."""
        return 10.0 ** ((self.circuit_power_dbm - 30.0) / 10.0) * self.circuit_time

    @property
    def e_cmp(self) -> float:
        return compute_energy(self.varsigma, self.omega, self.vartheta, self.Q_bits)

    @property
    def r_dev_eff(self) -> float:
        return self.r_dev if self.r_dev > 0 else self.bandwidth

    @property
    def r_mec_eff(self) -> float:
        return self.r_mec if self.r_mec > 0 else self.bandwidth

    def validate(self) -> None:
        if min(self.N_cu, self.N_mec, self.M, self.K, self.C) < 1 or self.L < 0:
            raise ConfigError("network dimensions must be positive (L may be zero)")
        if self.C < 2:
            raise ConfigError("need at least two classes")
        if self.N_cu <= self.M * self.N_mec - self.N_mec:
            # the central array must out-dimension the stacked interference of
            # the other M-1 servers, otherwise no null space is left
            raise ConfigError("N_cu too small for interference nulling across M servers")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy '{self.policy}' (choose from {', '.join(POLICIES)})")
        if self.scheduling not in SCHEDULING_MODES:
            raise ConfigError(f"unknown scheduling mode '{self.scheduling}'")
        if self.mobility not in MOBILITY_MODES:
            raise ConfigError(f"unknown mobility mode '{self.mobility}'")
        if not 0 <= self.B_0 <= self.B_max:
            raise ConfigError("initial battery must lie in [0, B_max]")
        if self.theta_max < 0 or self.bandwidth <= 0 or self.cell_radius <= 0:
            raise ConfigError("theta_max, bandwidth, cell_radius must be non-negative/positive")
        if not 0 <= self.e_th_percentile <= 100:
            raise ConfigError("e_th_percentile must lie in [0, 100]")
        if not 1 <= self.classes_per_device <= self.C:
            raise ConfigError("classes_per_device must lie in [1, C]")
        if self.K > self.M * self.N_mec:
            warnings.warn(
                f"{self.K} devices across {self.M} servers exceed "
                f"{self.M * self.N_mec} spatial streams; zero forcing may fail",
                stacklevel=2,
            )


_FIELD_TYPES: dict[str, type] | None = None


def _field_types() -> dict[str, type]:
    global _FIELD_TYPES
    if _FIELD_TYPES is None:
        _FIELD_TYPES = typing.get_type_hints(SimConfig)
    return _FIELD_TYPES


def coerce_value(key: str, raw: str):
    """Parse a raw config string into the typed value of the given field."""
    key = CONFIG_ALIASES.get(key, key)
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key '{key}'")
    target = types[key]
    raw = raw.strip()
    if target is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean '{raw}' for key '{key}'")
    try:
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {target.__name__} '{raw}' for key '{key}'") from exc
    return raw


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read flat ``key = value`` lines; '#' starts a comment."""
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{body}'")
        key, raw = body.split("=", 1)
        overrides[key.strip()] = raw.strip()
    return overrides


def make_config(raw_overrides: dict[str, str] | None = None, **typed_overrides) -> SimConfig:
    """Build a validated config from raw strings and/or typed keyword values."""
    values: dict = {}
    for key, raw in (raw_overrides or {}).items():
        canonical = CONFIG_ALIASES.get(key, key)
        values[canonical] = coerce_value(key, raw)
    for key, val in typed_overrides.items():
        if key not in _field_types():
            raise ConfigError(f"unknown config key '{key}'")
        values[key] = val
    cfg = SimConfig(**values)
    cfg.validate()
    return cfg


def fmt(value) -> str:
    """Serialise one CSV/config cell; floats carry 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def dump_config(cfg: SimConfig, path: str | Path, header: list[str] | None = None) -> None:
    """Write the full config as a reloadable ``key = value`` file."""
    lines = [f"# {h}" for h in (header or [])]
    for f in dataclasses.fields(cfg):
        lines.append(f"{f.name} = {fmt(getattr(cfg, f.name))}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class Streams:
    """Independent random streams of one run, all derived from (seed, run index)."""

    place: np.random.Generator
    data: np.random.Generator
    fading: np.random.Generator
    backhaul: np.random.Generator
    policy: np.random.Generator
    mobility: np.random.Generator
    train: np.random.Generator
    sched: np.random.Generator


def make_streams(seed: int, run_index: int = 0) -> Streams:
    children = np.random.SeedSequence((seed, run_index)).spawn(8)
    return Streams(*(np.random.default_rng(c) for c in children))


def sample_backhaul_gains(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-frame filtered backhaul power (L, M) under block diagonalization."""
    n = 1 if cfg.frozen_channels else cfg.L
    out = np.zeros((max(n, 1), cfg.M))
    for l in range(max(n, 1)):
        channels = [sample_rician(cfg.N_mec, cfg.N_cu, cfg.rician_k, rng) for _ in range(cfg.M)]
        out[l] = bd_gains(channels)
    return out


def sample_access_fading(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance access fading tensor (L, M, N_mec, K)."""
    n = max(1 if cfg.frozen_channels else cfg.L, 1)
    shape = (n, cfg.M, cfg.N_mec, cfg.K)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _make_scenario(
    cfg: SimConfig,
    betas: np.ndarray,
    bd: np.ndarray,
    fading: np.ndarray | None,
) -> EnergyScenario:
    return EnergyScenario(
        n_frames=cfg.L,
        sigma2=cfg.sigma2,
        bandwidth=cfg.bandwidth,
        q_bits=cfg.Q_bits,
        r_dev=cfg.r_dev_eff,
        r_mec=cfg.r_mec_eff,
        e_cir_dev=cfg.e_cir,
        e_cir_mec=cfg.e_cir,
        e_cmp=cfg.e_cmp,
        n_mec_antennas=cfg.N_mec,
        b_max=cfg.B_max,
        b0=np.full(cfg.K, cfg.B_0),
        betas=betas,
        bd=bd,
        fading=fading,
        alpha=cfg.alpha,
        frozen=cfg.frozen_channels,
    )


def build_static_scenario(cfg: SimConfig) -> tuple[DataSplit, np.ndarray, EnergyScenario]:
    """Static drop (no mobility) and its energy-rollout context.

    Returns the data split, the (M, K) pathloss gains of the drop, and the
    scenario; used by the pure-energy entry points.
    """
    cfg.validate()
    st = make_streams(cfg.seed)
    mec_pos = topology.place_uniform(cfg.M, cfg.cell_radius, st.place)
    dev_pos = topology.place_uniform(cfg.K, cfg.cell_radius, st.place)
    split = fl.skewed_split(
        cfg.K, cfg.C, cfg.classes_per_device, cfg.samples_per_device, st.data, cfg.split_concentration
    )
    gains = topology.gain_matrix(mec_pos, dev_pos, cfg.nu)
    bd = sample_backhaul_gains(cfg, st.backhaul)
    fading = sample_access_fading(cfg, st.fading)
    return split, gains, _make_scenario(cfg, gains, bd, fading)


@dataclass
class ExperimentResult:
    """Everything one run produced, ready for export or comparison."""

    config: SimConfig
    ledger: EnergyLedger
    metrics: list[tuple[int, float, float, float]]  # (round, theta, accuracy, loss)
    assoc_log: np.ndarray  # (L, K) server of each device per frame
    active_log: np.ndarray  # (L, K) bool
    theta_log: np.ndarray  # (L,)
    final_assoc: Association
    trace: topology.MobilityTrace | None
    wall_clock: float

    @property
    def delta(self) -> float:
        return self.ledger.delta

    @property
    def final_accuracy(self) -> float:
        return self.metrics[-1][2] if self.metrics else float("nan")

    @property
    def final_theta(self) -> float:
        return float(self.theta_log[-1]) if self.theta_log.size else 0.0


def _initial_association(
    cfg: SimConfig,
    split: DataSplit,
    gains0: np.ndarray,
    scenario: EnergyScenario,
    st: Streams,
) -> Association:
    if cfg.policy == "h2rma":
        return h2rma_associate(split, gains0, cfg.theta_max, capacity=cfg.N_mec)
    if cfg.policy == "random":
        return random_associate(cfg.K, cfg.M, st.policy, capacity=cfg.N_mec)
    frozen = scenario if scenario.frozen else replace(scenario, frozen=True, _zf_cache={})
    assoc, _ = bfs_optimal(split, gains0, frozen, cfg.theta_max, capacity=cfg.N_mec)
    return assoc


def run_experiment(
    cfg: SimConfig,
    streams: Streams | None = None,
    backhaul: np.ndarray | None = None,
) -> ExperimentResult:
    """Run one seeded experiment end to end.

    ``streams`` and ``backhaul`` can be injected so that several policies see
    byte-identical randomness; both default to fresh draws from the config
    seed.
    """
    t0 = time.perf_counter()
    cfg.validate()
    st = streams or make_streams(cfg.seed)
    mec_pos = topology.place_uniform(cfg.M, cfg.cell_radius, st.place)
    dev_pos = topology.place_uniform(cfg.K, cfg.cell_radius, st.place)
    split = fl.skewed_split(
        cfg.K, cfg.C, cfg.classes_per_device, cfg.samples_per_device, st.data, cfg.split_concentration
    )
    datasets, test = None, None
    if cfg.fl_enabled:
        means = cfg.class_sep * st.data.standard_normal((cfg.C, cfg.d_features))
        datasets, test = fl.synth_datasets(split, means, cfg.noise_std, st.data, cfg.test_per_class)

    trace = None
    gains0 = topology.gain_matrix(mec_pos, dev_pos, cfg.nu)
    if cfg.mobility == "hmm":
        transitions = topology.default_transitions(cfg.p_stay)
        trace = topology.simulate_trace(
            dev_pos, cfg.L, cfg.T_frame, cfg.cell_radius, transitions, st.mobility, cfg.gamma_shape
        )
        betas = np.stack(
            [topology.gain_matrix(mec_pos, trace.positions[l + 1], cfg.nu) for l in range(cfg.L)]
        ) if cfg.L else np.zeros((0, cfg.M, cfg.K))
    else:
        betas = gains0

    bd = backhaul if backhaul is not None else sample_backhaul_gains(cfg, st.backhaul)
    fading = sample_access_fading(cfg, st.fading)
    scenario = _make_scenario(cfg, betas, bd, fading)

    assoc = _initial_association(cfg, split, gains0, scenario, st)

    grid = topology.MicroCellGrid(cfg.mu_cell)
    psi_nml = topology.frames_per_cell(cfg.mu_cell, cfg.T_frame, cfg.v_normal)
    psi_rsk = topology.frames_per_cell(cfg.mu_cell, cfg.T_frame, cfg.v_risky)
    cells_ref = [topology.micro_cell_of(p, grid) for p in dev_pos]
    ranges = initial_ranges(assoc, gains0)

    batteries = np.full(cfg.K, float(cfg.B_0))
    random_off: np.ndarray | None = None
    weights = fl.init_weights(cfg.C, cfg.d_features) if cfg.fl_enabled else None
    ledger = EnergyLedger(cfg.M, cfg.K)
    metrics: list[tuple[int, float, float, float]] = []
    assoc_log = np.zeros((cfg.L, cfg.K), dtype=int)
    active_log = np.zeros((cfg.L, cfg.K), dtype=bool)
    theta_log = np.zeros(cfg.L)

    for l in range(cfg.L):
        if trace is not None and cfg.dhda and dhda_trigger(l + 1, psi_nml, psi_rsk):
            # each walker class is re-checked on its own cadence
            due = np.zeros(cfg.K, dtype=bool)
            if not math.isinf(psi_rsk) and (l + 1) % int(psi_rsk) == 0:
                due |= trace.states[l + 1] == topology.MobilityClass.RISKY
            if not math.isinf(psi_nml) and (l + 1) % int(psi_nml) == 0:
                due |= trace.states[l + 1] == topology.MobilityClass.NORMAL
            cells_now = [topology.micro_cell_of(p, grid) for p in trace.positions[l + 1]]
            moved = [k for k in range(cfg.K) if due[k] and cells_now[k] != cells_ref[k]]
            assoc = dhda_update(
                assoc, ranges, split, scenario.betas_at(l), moved, cfg.theta_max, capacity=cfg.N_mec
            )
            for k in np.nonzero(due)[0]:
                cells_ref[k] = cells_now[k]
        groups = assoc.groups()

        if cfg.scheduling in ("heuristic", "random"):
            e_ac_probe = np.zeros(cfg.K)
            for m, devs in enumerate(groups):
                if devs.size:
                    e_ac_probe[devs] = scenario.ac_factor * scenario.noise_gains(l, m, devs)
            e_th = cfg.e_th if cfg.e_th > 0 else float(np.percentile(e_ac_probe, cfg.e_th_percentile))
            if cfg.scheduling == "heuristic":
                active = schedule_devices(e_ac_probe, e_th, split, assoc, cfg.theta_max)
            else:
                # devices sit out for a stretch of frames, so the baseline
                # draws one uniform deactivation set of the same size |Omega|
                # and holds it for the run
                if random_off is None:
                    n_off = int(np.sum(e_ac_probe > e_th))
                    random_off = (
                        st.sched.choice(cfg.K, size=n_off, replace=False) if n_off else np.array([], dtype=int)
                    )
                active = np.ones(cfg.K, dtype=bool)
                active[random_off] = False
        else:
            active = np.ones(cfg.K, dtype=bool)

        frame = frame_energy_step(l, groups, active, batteries, scenario)
        ledger.add_frame(
            frame["e_cmp"], frame["e_ac"], frame["e_dev"], frame["harvest"],
            batteries.copy(), active, frame["e_wet"], frame["e_bh"],
            frame["e_mec"], frame["alpha"],
        )

        acc, loss = float("nan"), float("nan")
        if cfg.fl_enabled:
            lr_l = cfg.lr / math.sqrt(l + 1)
            updated: dict[int, np.ndarray] = {}
            for k in range(cfg.K):
                if active[k]:
                    updated[k] = fl.local_train(
                        weights, datasets[k], cfg.local_epochs, lr_l, st.train, cfg.C, cfg.batch_size
                    )
            server_models, server_sizes = [], []
            for devs in groups:
                act = [k for k in devs if active[k]]
                if not act:
                    continue
                sizes = np.array([datasets[k].n_samples for k in act], dtype=float)
                server_models.append(fl.mec_aggregate([updated[k] for k in act], sizes))
                server_sizes.append(sizes.sum())
            if server_models:
                weights = fl.cu_aggregate(server_models, np.array(server_sizes))
            acc, loss = fl.evaluate(weights, test, cfg.C)

        theta_l = divergence(split, assoc, active)
        theta_log[l] = theta_l
        metrics.append((l + 1, theta_l, acc, loss))
        assoc_log[l] = assoc.assignment
        active_log[l] = active

    return ExperimentResult(
        config=cfg,
        ledger=ledger,
        metrics=metrics,
        assoc_log=assoc_log,
        active_log=active_log,
        theta_log=theta_log,
        final_assoc=assoc,
        trace=trace,
        wall_clock=time.perf_counter() - t0,
    )


def compare_policies(
    cfg: SimConfig,
    policies: list[str],
    n_seeds: int,
    param: str = "",
    value: float | int | str = "",
) -> tuple[list[dict], list[dict], dict[str, np.ndarray]]:
    """Run every policy on identical seeds and channels.

    Returns aggregate rows (one per policy), per-seed rows, and the per-policy
    mean accuracy curve over rounds (empty when learning is disabled).
    """
    for pol in policies:
        if pol not in POLICIES:
            raise ConfigError(f"unknown policy '{pol}'")
    seed_rows: list[dict] = []
    deltas: dict[str, list[float]] = {p: [] for p in policies}
    accs: dict[str, list[float]] = {p: [] for p in policies}
    curves: dict[str, np.ndarray] = {p: np.zeros(cfg.L) for p in policies} if cfg.fl_enabled else {}
    for i in range(n_seeds):
        shared = make_streams(cfg.seed, i)
        bd = sample_backhaul_gains(cfg, shared.backhaul)
        for pol in policies:
            res = run_experiment(replace(cfg, policy=pol), streams=make_streams(cfg.seed, i), backhaul=bd)
            deltas[pol].append(res.delta)
            accs[pol].append(res.final_accuracy)
            if cfg.fl_enabled and cfg.L:
                curves[pol] += np.array([m[2] for m in res.metrics]) / n_seeds
            seed_rows.append(
                {
                    "policy": pol,
                    "param": param,
                    "value": value,
                    "seed": i,
                    "delta": res.delta,
                    "accuracy": res.final_accuracy,
                    "theta_final": res.final_theta,
                }
            )
    agg_rows = [
        {
            "policy": pol,
            "param": param,
            "value": value,
            "seeds": n_seeds,
            "mean_delta": float(np.mean(deltas[pol])) if deltas[pol] else float("nan"),
            "std_delta": float(np.std(deltas[pol])) if deltas[pol] else float("nan"),
            "mean_accuracy": float(np.mean(accs[pol])) if accs[pol] else float("nan"),
        }
        for pol in policies
    ]
    return agg_rows, seed_rows, curves


def sweep(
    cfg: SimConfig,
    param: str,
    values: list,
    policies: list[str],
    n_seeds: int,
) -> tuple[list[dict], list[dict]]:
    """Sweep one parameter over the given values for every policy.

    Backhaul realisations are shared across swept values whenever the swept
    parameter does not alter the backhaul statistics, so curves differ only
    through the parameter itself.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep '{param}' (choose from {', '.join(sorted(SWEEPABLE))})")
    field = SWEEPABLE[param]
    field_type = _field_types()[field]
    agg_rows: list[dict] = []
    seed_rows: list[dict] = []
    bd_cache: dict[int, np.ndarray] = {}
    cacheable = param != "M"
    for value in values:
        cfg_v = replace(cfg, **{field: field_type(value)})
        cfg_v.validate()
        for i in range(n_seeds):
            if cacheable and i in bd_cache:
                bd = bd_cache[i]
            else:
                bd = sample_backhaul_gains(cfg_v, make_streams(cfg.seed, i).backhaul)
                if cacheable:
                    bd_cache[i] = bd
            for pol in policies:
                res = run_experiment(replace(cfg_v, policy=pol), streams=make_streams(cfg.seed, i), backhaul=bd)
                seed_rows.append(
                    {
                        "policy": pol,
                        "param": param,
                        "value": value,
                        "seed": i,
                        "delta": res.delta,
                        "accuracy": res.final_accuracy,
                        "theta_final": res.final_theta,
                    }
                )
        for pol in policies:
            sub = [r for r in seed_rows if r["policy"] == pol and r["value"] == value]
            agg_rows.append(
                {
                    "policy": pol,
                    "param": param,
                    "value": value,
                    "seeds": n_seeds,
                    "mean_delta": float(np.mean([r["delta"] for r in sub])),
                    "std_delta": float(np.std([r["delta"] for r in sub])),
                    "mean_accuracy": float(np.mean([r["accuracy"] for r in sub])),
                }
            )
    return agg_rows, seed_rows


def _write_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(cell) for cell in row])


def write_device_ledger(path: str | Path, ledger: EnergyLedger) -> None:
    _write_csv(path, ["frame", "device_id", "E_cmp", "E_ac", "E_dev", "A", "battery"], ledger.device_rows())


def write_mec_ledger(path: str | Path, ledger: EnergyLedger) -> None:
    _write_csv(path, ["frame", "mec_id", "E_wet", "E_bh", "E_mec", "alpha"], ledger.mec_rows())


def write_association(path: str | Path, result: ExperimentResult) -> None:
    rows = (
        (l + 1, k, int(result.assoc_log[l, k]), int(result.active_log[l, k]), result.theta_log[l])
        for l in range(result.assoc_log.shape[0])
        for k in range(result.assoc_log.shape[1])
    )
    _write_csv(path, ["frame", "device_id", "mec_id", "active_flag", "theta"], rows)


def write_metrics(path: str | Path, rows) -> None:
    """Rows are (round, policy, theta, test_accuracy, test_loss)."""
    _write_csv(path, ["round", "policy", "theta", "test_accuracy", "test_loss"], rows)


def write_mobility_trace(path: str | Path, trace: topology.MobilityTrace) -> None:
    _write_csv(path, ["frame", "device_id", "x", "y", "state", "speed"], trace.csv_rows())


def write_runs(path: str | Path, seed_rows: list[dict]) -> None:
    cols = ["policy", "param", "value", "seed", "delta", "accuracy", "theta_final"]
    _write_csv(path, cols, ([r[c] for c in cols] for r in seed_rows))


def write_summary(path: str | Path, agg_rows: list[dict]) -> None:
    cols = ["policy", "param", "value", "seeds", "mean_delta", "std_delta", "mean_accuracy"]
    _write_csv(path, cols, ([r[c] for c in cols] for r in agg_rows))
