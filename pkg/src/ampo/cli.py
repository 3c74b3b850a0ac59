"""Command-line front end: ``theory-check``, ``tabular``, ``control`` and ``project-bench``.

Settings come from built-in defaults, then an optional flat ``key = value``
file (``--config``), then command-line flags; later sources win.  Any key of
a subcommand can be given on the command line as ``--key value`` (dashes and
underscores are interchangeable).

Exit status: 0 success, 1 a check failed, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .exceptions import AmpoError, ConfigError, NumericalError

__all__ = ["main", "load_config", "parse_seeds", "DEFAULTS"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_COMMON = {
    "seed": "0",
    "out": "out",
    "mirror": "entropy",
    "eta0": 1.0,
    "schedule": "constant",
    "iters": 50,
    "projection_precision": 1e-8,
}

DEFAULTS = {
    "theory-check": {**_COMMON, "trials": 10_000, "mdps": 20, "inject_broken_projection": False},
    "tabular": {
        **_COMMON,
        "states": 5,
        "actions": 3,
        "gamma": 0.9,
        "mdp_seed": -1,  # -1: one random MDP per run seed
        "mdp": "",  # path of an MDP text file; overrides the random MDP
        "family": "tabular",
        "evaluation": "exact",
        "mc_samples": 100,
        "sampling": "uniform",
        "record_timing": False,
    },
    "control": {
        **_COMMON,
        "seed": "0-49",
        "mirror": "entropy,hyperbolic:1,l2,tsallis:0.5,tsallis:2",
        "env": "cartpole,acrobot",
        "total_steps": 500_000,
        "n_envs": 16,
        "n_steps": 128,
        "epochs": 4,
        "minibatches": 4,
        "gamma": 0.99,
        "gae_lambda": 0.95,
        "lr": 2.5e-3,
        "hidden": 64,
        "inner": "adam",
        "sgd_rate": 1e-3,
        "workers": 1,
    },
    "project-bench": {
        **_COMMON,
        "mirror": "entropy,l2,tsallis:2,hyperbolic:1",
        "min_log2": 1,
        "max_log2": 14,
        "repeats": 5,
    },
}


def _coerce(key, raw, default):
    if isinstance(default, bool):
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(str(raw).strip())
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(str(raw).strip())
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return str(raw).strip()


def _norm(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{i}: expected 'key = value'")
        out[_norm(key)] = value.strip()
    return out


def parse_seeds(spec: str) -> list[int]:
    """``"3"``, ``"0,2,5"`` or ``"0-9"`` (inclusive), combinable with commas."""
    seeds = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        lo, dash, hi = part.partition("-")
        try:
            if dash and lo:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"bad seed list {spec!r}") from None
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def resolve(command: str, file_values: dict, cli_values: dict) -> dict:
    """Merge defaults < file < CLI for ``command``, rejecting unknown keys."""
    defaults = DEFAULTS[command]
    cfg = dict(defaults)
    for source in (file_values, cli_values):
        for key, raw in source.items():
            k = _norm(key)
            if k not in defaults:
                raise ConfigError(f"unknown setting {key!r} for {command}")
            cfg[k] = _coerce(k, raw, defaults[k])
    return cfg


def _build_parser():
    parser = argparse.ArgumentParser(prog="ampo", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--seed")
        p.add_argument("--out")
        p.add_argument("--mirror")
        p.add_argument("--eta0")
        p.add_argument("--schedule")
        p.add_argument("--iters")
        p.add_argument("--projection-precision")
    return parser


def _extra_flags(rest) -> dict:
    out = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
            i += 1
        elif i + 1 < len(rest):
            out[tok] = rest[i + 1]
            i += 2
        else:
            raise ConfigError(f"flag {tok} needs a value")
    return out


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


# subcommands


def cmd_theory_check(cfg: dict) -> int:
    from .theory import run_suites

    projector = None
    if cfg["inject_broken_projection"]:
        # test hook: ignore the scores and return the uniform distribution
        projector = lambda p: (lambda x: np.full(np.shape(x), 1.0 / np.shape(x)[-1]))  # noqa: E731
    seed = parse_seeds(cfg["seed"])[0]
    results = run_suites(trials=cfg["trials"], seed=seed, projector=projector, pgt_mdps=cfg["mdps"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "theory_report.json").write_text(json.dumps([r.as_dict() for r in results], indent=2) + "\n")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: trials={r.trials} failures={r.failures} "
              f"worst_slack={r.worst_slack:.3g} tol={r.tolerance:g} ({r.seconds:.2f}s)")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def _tabular_schedule(cfg, mdp, precision):
    from .engine import AmpoConfig, Geometric, parse_schedule, run

    token = cfg["schedule"]
    if token == "geometric:auto":
        pilot = run(AmpoConfig(mirror=cfg["mirror"], iters=30, precision=precision), mdp)
        return Geometric.from_mismatch(cfg["eta0"], max(r.nu for r in pilot))
    return parse_schedule(token, cfg["eta0"])


def _log_gap_slope(gaps, floor=1e-13):
    t = np.arange(len(gaps))
    m = gaps > floor
    if m.sum() < 2:
        return math.nan
    return float(np.polyfit(t[m], np.log(gaps[m]), 1)[0])


def cmd_tabular(cfg: dict) -> int:
    from .engine import AmpoConfig, Geometric, run, write_csv
    from .mdp import load_mdp, random_mdp
    from .mirror_maps import parse_mirror_map

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for seed in parse_seeds(cfg["seed"]):
        if cfg["mdp"]:
            mdp = load_mdp(cfg["mdp"])
        else:
            mseed = seed if cfg["mdp_seed"] < 0 else cfg["mdp_seed"]
            mdp = random_mdp(cfg["states"], cfg["actions"], cfg["gamma"], mseed)
        for token in cfg["mirror"].split(","):
            p = parse_mirror_map(token)
            sched = _tabular_schedule({**cfg, "mirror": token}, mdp, cfg["projection_precision"])
            acfg = AmpoConfig(
                mirror=p, schedule=sched, family=cfg["family"], evaluation=cfg["evaluation"],
                mc_samples=cfg["mc_samples"], sampling=cfg["sampling"], precision=cfg["projection_precision"],
                iters=cfg["iters"], seed=seed,
                features=_linear_features(mdp, seed) if cfg["family"] == "linear" else None,
            )
            recs = run(acfg, mdp)
            name = f"tabular_{p.token.replace(':', '-')}_seed{seed}.csv"
            write_csv(recs, out / name, timing=cfg["record_timing"])
            gaps = np.array([r.gap for r in recs])
            nu = max(r.nu for r in recs)
            nu_bar = sched.ratio / (sched.ratio - 1) if isinstance(sched, Geometric) and sched.ratio > 1 else nu
            hit = np.flatnonzero(gaps <= 1e-8)
            summary.append([
                seed, p.token, cfg["schedule"], len(recs), gaps[-1],
                int(hit[0]) if hit.size else -1, _log_gap_slope(gaps),
                math.log(1 - 1 / nu_bar) if nu_bar > 1 else -math.inf, nu, nu_bar,
            ])
            print(f"seed {seed} {p.token}: final gap {gaps[-1]:.3g}, slope {summary[-1][6]:.3g} "
                  f"(predicted {summary[-1][7]:.3g})")
    _write_csv(out / "tabular_summary.csv",
               ["seed", "mirror", "schedule", "iters", "final_gap", "first_iter_gap_1e-8", "log_gap_slope",
                "predicted_slope", "measured_nu", "nu_bar"],
               [[_fmt(x) for x in row] for row in summary])
    return EXIT_OK


def _linear_features(mdp, seed):
    rng = np.random.default_rng(seed)
    S, A = mdp.n_states, mdp.n_actions
    return np.linalg.qr(rng.normal(size=(S * A, S * A)))[0].reshape(S, A, S * A)


def cmd_control(cfg: dict) -> int:
    from .control import ControlConfig, final_window_mean, train_seeds
    from .engine import parse_schedule

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = parse_seeds(cfg["seed"])
    summary = []
    for env in cfg["env"].split(","):
        for token in cfg["mirror"].split(","):
            base = ControlConfig(
                env=env.strip(), mirror=token.strip(), schedule=parse_schedule(cfg["schedule"], cfg["eta0"]),
                total_steps=cfg["total_steps"], n_envs=cfg["n_envs"], n_steps=cfg["n_steps"], epochs=cfg["epochs"],
                minibatches=cfg["minibatches"], gamma=cfg["gamma"], gae_lambda=cfg["gae_lambda"], lr=cfg["lr"],
                hidden=cfg["hidden"], inner=cfg["inner"], sgd_rate=cfg["sgd_rate"],
                precision=cfg["projection_precision"],
            )
            tag = f"{base.env}_{base.mirror.token.replace(':', '-')}"
            results = train_seeds(base, seeds, workers=cfg["workers"])
            curves = np.array([r.returns for r in results])
            for seed, r in zip(seeds, results):
                _write_csv(out / f"control_{tag}_seed{seed}.csv", ["update", "steps", "mean_return", "episodes"],
                           [[u, int(s), _fmt(v), int(c)] for u, (s, v, c) in
                            enumerate(zip(r.steps, r.returns, r.episodes))])
            with np.errstate(invalid="ignore"):
                import warnings

                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    mean, std = np.nanmean(curves, axis=0), np.nanstd(curves, axis=0)
            _write_csv(out / f"control_{tag}_mean.csv", ["update", "steps", "mean_return", "std_return", "runs"],
                       [[u, int(s), _fmt(m), _fmt(sd), int(np.sum(~np.isnan(curves[:, u])))]
                        for u, (s, m, sd) in enumerate(zip(results[0].steps, mean, std))])
            finals = [final_window_mean(r) for r in results]
            firsts = [final_window_mean(_head(r)) for r in results]
            summary.append([base.env, base.mirror.token, len(seeds), float(np.nanmean(finals)),
                            float(np.nanmean(firsts))])
            print(f"{base.env} {base.mirror.token}: final-window mean {summary[-1][3]:.1f} "
                  f"(first window {summary[-1][4]:.1f}) over {len(seeds)} seeds")
    _write_csv(out / "control_summary.csv", ["env", "mirror", "seeds", "final_window_mean", "first_window_mean"],
               [[_fmt(x) for x in row] for row in summary])
    return EXIT_OK


def _head(result, frac=0.1):
    from .control import ControlResult

    k = max(1, int(round(frac * len(result.returns))))
    return ControlResult(result.returns[:k], result.episodes[:k], result.steps[:k])


def cmd_project_bench(cfg: dict) -> int:
    from .bench import affine_fit, bench, doubling_ratios

    tokens = [t.strip() for t in cfg["mirror"].split(",")]
    sizes = [2**k for k in range(cfg["min_log2"], cfg["max_log2"] + 1)]
    rows = bench(tokens, sizes, cfg["projection_precision"], cfg["repeats"], parse_seeds(cfg["seed"])[0])
    out = Path(cfg["out"])
    _write_csv(out / "project_bench.csv", ["kind", "method", "n_actions", "precision", "seconds"],
               [[r.kind, r.method, r.n_actions, _fmt(r.precision), _fmt(r.seconds)] for r in rows])
    fits = []
    for token in tokens:
        ratios = doubling_ratios(rows, token)
        a, c, worst = affine_fit(rows, token)
        fits.append([token, _fmt(ratios.max() if ratios.size else math.nan), _fmt(a), _fmt(c), _fmt(worst)])
        print(f"{token}: worst doubling ratio {fits[-1][1]}, fit overhead {a:.3g}s, "
              f"per-unit {c:.3g}s, worst fit ratio {worst:.2f}")
    _write_csv(out / "project_bench_fit.csv",
               ["kind", "max_doubling_ratio", "overhead_seconds", "seconds_per_unit", "worst_fit_ratio"], fits)
    return EXIT_OK


COMMANDS = {
    "theory-check": cmd_theory_check,
    "tabular": cmd_tabular,
    "control": cmd_control,
    "project-bench": cmd_project_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        file_values = load_config(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
        flags.update(_extra_flags(rest))
        cfg = resolve(args.command, file_values, flags)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (AmpoError, ValueError, KeyError) as exc:
        # invalid inputs surfacing from the library (bad MDP files, domains, simplex checks)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
