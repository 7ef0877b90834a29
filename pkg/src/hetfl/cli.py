"""Command-line front end.

Four verbs: ``run`` (one seeded experiment), ``compare`` (several policies on
identical seeds and channels), ``sweep`` (one parameter over a value list),
and ``verify`` (fast numerical self-checks).  Every verb that produces output
writes CSV files, a reloadable manifest, and rendered figures into the output
directory.  Exit codes: 0 success, 1 configuration error, 2 infeasible
instance; failures print a single ``ERROR:<code>:`` line to standard error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, fl, report
from .association import (
    Association,
    DataSplit,
    InfeasibleError,
    divergence,
)
from .channel import ChannelError, bd_decode, sample_access, sample_rician, zf_decode
from .energy import EnergyError, grid_cost, optimal_wet
from .sim import (
    SWEEPABLE,
    ConfigError,
    SimConfig,
    coerce_value,
    compare_policies,
    dump_config,
    fmt,
    load_config_file,
    make_config,
    run_experiment,
    sweep,
    write_association,
    write_device_ledger,
    write_mec_ledger,
    write_metrics,
    write_mobility_trace,
    write_runs,
    write_summary,
)


def _collect_overrides(extra: list[str]) -> dict[str, str]:
    """Turn trailing ``--key value`` (or ``--key=value``) pairs into a dict."""
    overrides: dict[str, str] = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or len(token) <= 2:
            raise ConfigError(f"unexpected argument '{token}'")
        key = token[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
        else:
            i += 1
            if i >= len(extra):
                raise ConfigError(f"missing value for '--{key}'")
            raw = extra[i]
        overrides[key] = raw
        i += 1
    return overrides


def _build_config(args, extra: list[str]) -> SimConfig:
    raw = load_config_file(args.config) if args.config else {}
    raw.update(_collect_overrides(extra))
    typed: dict = {}
    if args.seed is not None:
        typed["seed"] = args.seed
    elif "seed" not in raw and os.environ.get("HETFL_SEED"):
        try:
            typed["seed"] = int(os.environ["HETFL_SEED"])
        except ValueError as exc:
            raise ConfigError(f"HETFL_SEED is not an integer: {os.environ['HETFL_SEED']}") from exc
    for flag in ("policy", "scheduling", "mobility"):
        value = getattr(args, flag, None)
        if value is not None:
            typed[flag] = value
    return make_config(raw, **typed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(cfg: SimConfig, out: Path, verb: str, notes: list[str] | None = None) -> None:
    header = [f"hetfl {__version__}", f"command: {verb}"] + (notes or [])
    dump_config(cfg, out / "manifest.cfg", header=header)


def _split_list(raw: str, what: str) -> list[str]:
    items = [part.strip() for part in raw.split(",") if part.strip()]
    if not items:
        raise ConfigError(f"empty {what} list")
    return items


def cmd_run(args, extra: list[str]) -> int:
    cfg = _build_config(args, extra)
    out = _out_dir(args)
    result = run_experiment(cfg)
    _write_manifest(cfg, out, "run")
    write_device_ledger(out / "device_energy.csv", result.ledger)
    write_mec_ledger(out / "mec_energy.csv", result.ledger)
    write_association(out / "association.csv", result)
    if cfg.fl_enabled:
        rows = ((r, cfg.policy, th, acc, loss) for r, th, acc, loss in result.metrics)
        write_metrics(out / "metrics.csv", rows)
    if result.trace is not None:
        write_mobility_trace(out / "mobility.csv", result.trace)
    report.plot_run(result.ledger, result.theta_log, out / "run.png")
    print(f"policy = {cfg.policy}")
    print(f"delta = {fmt(result.delta)}")
    if cfg.fl_enabled:
        print(f"final_accuracy = {fmt(result.final_accuracy)}")
    print(f"outputs in {out}")
    return 0


def cmd_compare(args, extra: list[str]) -> int:
    cfg = _build_config(args, extra)
    policies = _split_list(args.policies, "policy")
    agg_rows, seed_rows, curves = compare_policies(cfg, policies, args.seeds)
    out = _out_dir(args)
    _write_manifest(cfg, out, "compare", [f"policies: {args.policies}", f"seeds: {args.seeds}"])
    write_summary(out / "summary.csv", agg_rows)
    write_runs(out / "runs.csv", seed_rows)
    if curves:
        report.plot_accuracy(curves, out / "accuracy.png")
    for row in agg_rows:
        print(
            f"{row['policy']}: mean_delta = {fmt(row['mean_delta'])}, "
            f"mean_accuracy = {fmt(row['mean_accuracy'])}"
        )
    print(f"outputs in {out}")
    return 0


def cmd_sweep(args, extra: list[str]) -> int:
    cfg = _build_config(args, extra)
    if args.param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep '{args.param}' (choose from {', '.join(sorted(SWEEPABLE))})")
    field = SWEEPABLE[args.param]
    values = [coerce_value(field, v) for v in _split_list(args.values, "value")]
    policies = _split_list(args.policies, "policy")
    agg_rows, seed_rows = sweep(cfg, args.param, values, policies, args.seeds)
    out = _out_dir(args)
    _write_manifest(
        cfg, out, "sweep",
        [f"param: {args.param}", f"values: {args.values}",
         f"policies: {args.policies}", f"seeds: {args.seeds}"],
    )
    write_summary(out / "summary.csv", agg_rows)
    write_runs(out / "runs.csv", seed_rows)
    report.plot_sweep(agg_rows, args.param, out / "sweep.png")
    print(f"{len(agg_rows)} aggregate rows over {args.param} in {out}")
    return 0


# ---------------------------------------------------------------------------
# verify: fast numerical self-checks


def _check_wet_budget() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    step_rel = 1e-4
    for _ in range(20):
        n = int(rng.integers(1, 7))
        e_dev = rng.uniform(0.1, 5.0, n)
        batt = rng.uniform(0.0, 3.0, n)
        beta_xi = rng.uniform(1e-3, 0.2, n)
        star = optimal_wet(list(zip(e_dev, batt, beta_xi)), 16)
        margin = batt - e_dev + star * beta_xi * 16
        if margin.min() < -1e-9:
            return False, f"budget {star:.6g} leaves a device short by {-margin.min():.3g} J"
        hi = max(2.0 * star, 1.0)
        step = step_rel * hi
        grid = np.arange(0.0, hi + step, step)
        feasible = np.all(batt - e_dev + grid[:, None] * (beta_xi * 16) >= -1e-12, axis=1)
        best = grid[feasible][0]
        if star > best + step + 1e-12:
            return False, f"grid search found {best:.6g} J below the closed form {star:.6g} J"
    return True, ""


def _check_zero_forcing() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    betas = rng.uniform(1e-6, 1e-3, 8)
    g = sample_access(betas, 16, rng)
    decoder = zf_decode(g)
    residual = np.abs(decoder.matrix.conj().T @ g - np.eye(8)).max()
    if residual >= 1e-8:
        return False, f"ZF residual {residual:.3g}"
    return True, ""


def _check_block_diagonalization() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    channels = [sample_rician(16, 128, 10.0, rng) for _ in range(8)]
    for m in range(8):
        decoder = bd_decode(channels, m)
        w = decoder.matrix
        for j in range(8):
            if j == m:
                continue
            leak = np.linalg.norm(channels[j] @ w) / np.linalg.norm(channels[j])
            if leak >= 1e-8:
                return False, f"server {j} leaks {leak:.3g} into server {m}'s filter"
    return True, ""


def _check_gradient() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    n_classes, d = 4, 5
    worst = 0.0
    for _ in range(10):
        w = rng.standard_normal(n_classes * (d + 1))
        x = rng.standard_normal((3, d))
        y = rng.integers(0, n_classes, 3)
        _, grad = fl.nll_and_gradient(w, x, y, n_classes)
        eps = 1e-6
        for idx in rng.choice(w.size, size=8, replace=False):
            wp, wm = w.copy(), w.copy()
            wp[idx] += eps
            wm[idx] -= eps
            fp, _ = fl.nll_and_gradient(wp, x, y, n_classes)
            fm, _ = fl.nll_and_gradient(wm, x, y, n_classes)
            fd = (fp - fm) / (2 * eps)
            worst = max(worst, abs(fd - grad[idx]) / max(1.0, abs(fd)))
    if worst >= 1e-5:
        return False, f"worst relative gradient error {worst:.3g}"
    return True, ""


def _check_aggregation() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    weights = [rng.standard_normal(12) for _ in range(6)]
    sizes = rng.integers(1, 50, 6).astype(float)
    groups = [[0, 1], [2, 3, 4], [5]]
    mec_models = [fl.mec_aggregate([weights[k] for k in g], sizes[[*g]]) for g in groups]
    mec_sizes = np.array([sizes[[*g]].sum() for g in groups])
    nested = fl.cu_aggregate(mec_models, mec_sizes)
    flat = fl.mec_aggregate(weights, sizes)
    gap = np.abs(nested - flat).max()
    if gap >= 1e-12:
        return False, f"nested vs flat gap {gap:.3g}"
    return True, ""


def _check_divergence() -> tuple[bool, str]:
    iid = DataSplit(np.full((2, 4), 10))
    assoc = Association.from_assignment(np.array([0, 0, 1, 1]), 2)
    th0 = divergence(iid, assoc)
    disjoint = DataSplit(np.array([[10, 10, 0, 0], [0, 0, 10, 10]]))
    th1 = divergence(disjoint, assoc)
    if abs(th0) >= 1e-12:
        return False, f"iid split gave divergence {th0:.3g}"
    if abs(th1 - 1.0) >= 1e-12:
        return False, f"disjoint split gave divergence {th1:.3g}, expected 1"
    return True, ""


def _check_energy_accounting() -> tuple[bool, str]:
    cfg = SimConfig(K=6, M=2, L=8, fl_enabled=False, seed=123)
    result = run_experiment(cfg)
    battery = result.ledger.battery
    if battery.min() < -1e-12 or battery.max() > cfg.B_max + 1e-12:
        return False, f"battery left [0, B_max]: [{battery.min():.3g}, {battery.max():.3g}]"
    recomputed = grid_cost(result.ledger)
    rel = abs(recomputed - result.delta) / max(1.0, abs(result.delta))
    if rel >= 1e-9:
        return False, f"ledger total drifted by {rel:.3g} relative"
    if not np.isfinite(result.delta) or result.delta < 0:
        return False, f"grid cost {result.delta!r}"
    return True, ""


_CHECKS = [
    ("transfer budget matches grid search", _check_wet_budget),
    ("zero-forcing filter inverts the access channel", _check_zero_forcing),
    ("block diagonalization nulls cross-server interference", _check_block_diagonalization),
    ("softmax gradient matches finite differences", _check_gradient),
    ("nested aggregation equals flat averaging", _check_aggregation),
    ("divergence hand values", _check_divergence),
    ("battery and ledger accounting", _check_energy_accounting),
]


def cmd_verify(args, extra: list[str]) -> int:
    if extra:
        raise ConfigError(f"unexpected argument '{extra[0]}'")
    failures = 0
    for name, check in _CHECKS:
        ok, detail = check()
        if ok:
            print(f"ok - {name}")
        else:
            failures += 1
            print(f"FAIL - {name}: {detail}")
    if failures:
        print(f"ERROR:1:{failures} verification check(s) failed", file=sys.stderr)
        return 1
    print(f"all {len(_CHECKS)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetfl",
        description="Energy-aware hierarchical federated learning simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", default="hetfl_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="base seed (wins over file and env)")
        p.add_argument("--policy", choices=("bfs", "h2rma", "random"), default=None)
        p.add_argument("--scheduling", choices=("off", "heuristic", "random"), default=None)
        p.add_argument("--mobility", choices=("off", "hmm"), default=None)

    run_p = sub.add_parser("run", help="run one seeded experiment")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="run several policies on identical seeds")
    add_common(cmp_p)
    cmp_p.add_argument("--policies", default="h2rma,random", help="comma-separated policy list")
    cmp_p.add_argument("--seeds", type=int, default=5, help="number of seeded repetitions")
    cmp_p.set_defaults(func=cmd_compare)

    swp_p = sub.add_parser("sweep", help="sweep one parameter over a value list")
    add_common(swp_p)
    swp_p.add_argument("--param", required=True, help=f"one of {', '.join(sorted(SWEEPABLE))}")
    swp_p.add_argument("--values", required=True, help="comma-separated value list")
    swp_p.add_argument("--policies", default="h2rma,random")
    swp_p.add_argument("--seeds", type=int, default=5)
    swp_p.set_defaults(func=cmd_sweep)

    ver_p = sub.add_parser("verify", help="run the numerical self-checks")
    ver_p.set_defaults(func=cmd_verify)

    return parser


def entry(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except (ConfigError, ValueError) as exc:
        print(f"ERROR:1:{exc}", file=sys.stderr)
        return 1
    except (InfeasibleError, ChannelError, EnergyError) as exc:
        print(f"ERROR:2:{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entry())
