"""Command line entry point: ``boolnet {train,validate,equiv,bench}``.

Every command reads an optional TOML config, fills in defaults, applies flag
overrides, writes the resolved config to ``<out>/resolved.toml`` and then
runs. Exit codes: 0 success, 1 run failure or failed check, 2 config error,
3 data error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import tomli
import tomli_w

log = logging.getLogger("boolnet")

SCHEMA = 1
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

DEFAULTS = {
    "run": {"seed": 0, "trials": 1000, "steps": 10000, "epochs": 200, "out_dir": "out", "threads": 1},
    "optimizer": {"eta0": 0.1, "schedule": "constant", "tau": 1.0, "kappa": "auto", "beta_mode": "adaptive",
                  "flip_mode": "deterministic", "seed": -1},
    "objective": {"kind": "quadratic", "d": 64, "mu": 0.1, "L": 1.0, "sigma": 10.0, "center": 0.5,
                  "scale": 1.0, "L_coupling": 0.5, "box": 3.0, "seed": 0},
    "model": {"hidden": [4], "loss": "squared", "shared_beta": False},
    "data": {"source": "xor", "path": "", "label_column": "label", "copies": 16, "batch_size": 4},
    "validate": {"checks": ["lemma1", "lemma2", "theorem"], "lemma_steps": 200, "theorem_seeds": 10,
                 "form": "proof", "engine": "abstraction"},
    "equiv": {"d": 128, "steps": 1000, "streams": 5, "eta": 0.3, "tau": 1.0, "q0": "deterministic",
              "grad_scale": 1.0},
    "bench": {"grid": [[8, 8, 4], [64, 64, 16], [128, 128, 32], [256, 256, 64], [512, 512, 64]],
              "repeats": 5},
}

# per-command defaults layered over DEFAULTS
COMMAND_DEFAULTS = {
    "train": {"optimizer": {"eta0": 0.3, "flip_mode": "stochastic"}},
    "validate": {"optimizer": {"eta0": 0.05, "flip_mode": "stochastic"}},
}


class ConfigError(Exception):
    pass


class RunFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config


def _check_type(section: str, key: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, str) or (section, key) == ("optimizer", "kappa") and isinstance(value, (int, float))
    if not ok:
        raise ConfigError(f"{section}.{key}: expected {type(default).__name__}, got {value!r}")
    return value


def resolve_config(command: str, path: str | None, overrides: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for section, values in COMMAND_DEFAULTS.get(command, {}).items():
        cfg[section].update(values)
    user = {}
    if path:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for section, values in user.items():
        if section not in cfg:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in cfg[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            cfg[section][key] = _check_type(section, key, value, DEFAULTS[section][key])
    for (section, key), value in overrides.items():
        if value is not None:
            cfg[section][key] = value
    if cfg["optimizer"]["seed"] < 0:
        cfg["optimizer"]["seed"] = cfg["run"]["seed"]
    return cfg


def optim_config(section: dict):
    from .optim import OptimConfig

    kappa = section["kappa"]
    if isinstance(kappa, str):
        if kappa not in ("auto", "none"):
            raise ConfigError(f"optimizer.kappa must be a number, 'auto' or 'none', got {kappa!r}")
        kappa = None if kappa == "none" else kappa
    try:
        return OptimConfig(eta0=section["eta0"], eta_schedule=section["schedule"], tau=section["tau"],
                           kappa=kappa, beta_mode=section["beta_mode"], flip_mode=section["flip_mode"],
                           seed=section["seed"])
    except ValueError as exc:
        raise ConfigError(f"[optimizer] {exc}") from None


def make_objective(section: dict):
    from . import analysis

    kind = section["kind"]
    if section["d"] < 1:
        raise ConfigError("objective.d must be >= 1")
    try:
        if kind == "quadratic":
            return analysis.random_quadratic(section["d"], mu=section["mu"], L=section["L"],
                                             sigma=section["sigma"], center=section["center"],
                                             seed=section["seed"])
        if kind == "quartic":
            return analysis.quartic_double_well(section["d"], scale=section["scale"], mu=section["mu"],
                                                L_coupling=section["L_coupling"], sigma=section["sigma"],
                                                box=section["box"], seed=section["seed"])
    except ValueError as exc:
        raise ConfigError(f"[objective] {exc}") from None
    raise ConfigError(f"objective.kind must be 'quadratic' or 'quartic', got {kind!r}")


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def load_dataset(cfg: dict):
    from .nettrain import Dataset, DataError, binarize_input, read_binary_dataset, read_csv_dataset, xor_dataset

    data = cfg["data"]
    source = data["source"]
    thresholds = None
    if source == "xor":
        if data["copies"] < 1:
            raise ConfigError("data.copies must be >= 1")
        base = xor_dataset(data["copies"])
        inputs, labels = base.inputs, base.labels
    elif source in ("csv", "binary"):
        if not data["path"]:
            raise ConfigError(f"data.path is required for source {source!r}")
        if not Path(data["path"]).is_file():
            raise DataError(f"dataset not found: {data['path']}")
        if source == "csv":
            features, labels = read_csv_dataset(data["path"], data["label_column"])
            inputs, thresholds = binarize_input(features)
        else:
            inputs, labels = read_binary_dataset(data["path"])
    else:
        raise ConfigError(f"data.source must be 'xor', 'csv' or 'binary', got {source!r}")
    batch = data["batch_size"]
    if not 1 <= batch <= len(labels):
        raise ConfigError(f"data.batch_size {batch} must lie in [1, {len(labels)}]")
    return Dataset(inputs, labels, batch), thresholds


def cmd_train(cfg: dict, out: Path) -> int:
    import numpy as np

    from .analysis import TraceRecord, write_trace_csv
    from .nettrain import BooleanMLP, train_epoch

    data, thresholds = load_dataset(cfg)
    labels = np.asarray(data.labels)
    loss = cfg["model"]["loss"]
    if np.issubdtype(labels.dtype, np.integer):
        if labels.min() < 0:
            raise ConfigError("class labels must be nonnegative integers")
        n_out = max(2, int(labels.max()) + 1)
    elif loss == "squared":
        n_out = 1
    else:
        raise ConfigError("cross_entropy needs integer class labels")
    sizes = [data.inputs.shape[1], *cfg["model"]["hidden"], n_out]
    if any(s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must be positive: {sizes}")
    try:
        model = BooleanMLP(sizes, loss=loss, cfg=optim_config(cfg["optimizer"]), seed=cfg["run"]["seed"],
                           shared_beta=cfg["model"]["shared_beta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model.thresholds = thresholds

    rng = np.random.default_rng([cfg["run"]["seed"], 1])
    records: list[TraceRecord] = []
    total = 0.0
    n_params = model.n_params

    def on_step(stats):
        nonlocal total
        t = len(records)
        total += stats["q_sq"]
        flips = int(sum(stats["flips"]))
        records.append(TraceRecord(
            t=t, loss=stats["loss"], grad_norm_sq=stats["q_sq"], run_avg=total / (t + 1), flips=flips,
            beta=1.0 - flips / n_params, e_sq=stats["e_sq"], h_sq=stats["h_sq"],
            delta_hat=stats["e_sq"] / stats["m_sq"] if stats["m_sq"] > 0 else 0.0, eta=stats["eta"],
        ))

    epochs = []
    try:
        for epoch in range(cfg["run"]["epochs"]):
            epochs.append(train_epoch(model, data, rng, epoch, on_step=on_step))
            log.info("epoch %d loss %.6g accuracy %.4f", epoch, epochs[-1].loss, epochs[-1].accuracy)
    except FloatingPointError as exc:
        write_trace_csv(out / "trace.csv", records)
        raise RunFailure(f"training aborted at step {len(records)}: {exc}") from None

    write_trace_csv(out / "trace.csv", records)
    (out / "model.bin").write_bytes(model.to_bytes())
    reached = next((m.epoch for m in epochs if m.accuracy == 1.0), None)
    betas = [b for m in epochs for step in m.betas for b in step]
    summary = {
        "schema": SCHEMA,
        "command": "train",
        "seed": cfg["run"]["seed"],
        "layer_sizes": sizes,
        "n_params": n_params,
        "epochs": len(epochs),
        "steps": len(records),
        "final_loss": epochs[-1].loss if epochs else None,
        "final_accuracy": epochs[-1].accuracy if epochs else None,
        "first_full_accuracy_epoch": reached,
        "first_epoch_flip_rate": sum(epochs[0].flip_rate) if epochs else None,
        "final_epoch_flip_rate": sum(epochs[-1].flip_rate) if epochs else None,
        "beta_min": min(betas) if betas else None,
        "beta_max": max(betas) if betas else None,
    }
    _write_json(out / "summary.json", summary)
    return 0


def cmd_validate(cfg: dict, out: Path) -> int:
    from . import analysis

    checks = cfg["validate"]["checks"]
    known = ("lemma1", "lemma2", "theorem", "floor")
    for name in checks:
        if name not in known:
            raise ConfigError(f"validate.checks: unknown check {name!r}; choose from {known}")
    ocfg = optim_config(cfg["optimizer"])
    if "lemma2" in checks:
        if ocfg.kappa is None:
            raise ConfigError("lemma2 requires optimizer.kappa to be set")
        if ocfg.flip_mode != "stochastic":
            raise ConfigError("lemma2 requires optimizer.flip_mode = 'stochastic'")
    obj = make_objective(cfg["objective"])
    run = cfg["run"]
    seeds = [run["seed"] + i for i in range(cfg["validate"]["theorem_seeds"])]
    reports = []
    for name in checks:
        started = time.perf_counter()
        if name == "lemma1":
            rep = analysis.monte_carlo_lemma1(obj, ocfg, run["trials"], cfg["validate"]["lemma_steps"], seed=run["seed"])
        elif name == "lemma2":
            rep = analysis.monte_carlo_lemma2(obj, ocfg, run["trials"], cfg["validate"]["lemma_steps"], seed=run["seed"])
        elif name == "theorem":
            rep, _ = analysis.check_theorem(obj, ocfg, run["steps"], seeds, form=cfg["validate"]["form"],
                                            engine=cfg["validate"]["engine"])
        else:
            rep = analysis.check_floor(obj, ocfg, run["steps"], seeds)
        log.info("%s: %s (%.1fs)", name, rep.status, time.perf_counter() - started)
        reports.append(rep.to_dict())
    failed = [r["name"] for r in reports if r["status"] == analysis.FAIL]
    _write_json(out / "report.json", {"schema": SCHEMA, "command": "validate", "objective": obj.kind,
                                      "d": obj.d, "checks": reports, "failed": failed})
    for r in reports:
        print(f"{r['name']}: {r['status']}" + (f" ({r['note']})" if r["note"] else ""))
    return 1 if failed else 0


def cmd_equiv(cfg: dict, out: Path) -> int:
    import numpy as np

    from .abstraction import equivalence_check

    eq = cfg["equiv"]
    if eq["d"] < 1 or eq["steps"] < 0 or eq["streams"] < 1:
        raise ConfigError("equiv needs d >= 1, steps >= 0, streams >= 1")
    if eq["q0"] not in ("deterministic", "stochastic"):
        raise ConfigError(f"equiv.q0 must be 'deterministic' or 'stochastic', got {eq['q0']!r}")
    seed = cfg["run"]["seed"]
    status = 0
    with open(out / "report.jsonl", "w") as fh:
        for stream in range(eq["streams"]):
            rng = np.random.default_rng([seed, stream])
            grads = rng.standard_normal((eq["steps"], eq["d"])) * eq["grad_scale"]
            try:
                rep = equivalence_check(grads, eq["eta"], tau=eq["tau"], q0=eq["q0"], seed=seed + stream)
            except ValueError as exc:
                raise ConfigError(f"[equiv] {exc}") from None
            record = {"stream": stream, **json.loads(rep.to_json())}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            if not rep.equivalent:
                print(f"stream {stream}: diverged at step {rep.step}, coordinate {rep.coordinate} "
                      f"({rep.quantity}: optimizer {rep.optim_value!r} vs abstraction {rep.abstract_value!r})")
                status = 1
    if status == 0:
        print(f"{eq['streams']} streams equivalent (d={eq['d']}, T={eq['steps']})")
    return status


def cmd_bench(cfg: dict, out: Path) -> int:
    import numpy as np

    from .bitcore import BooleanTensor, forward_layer, forward_reference

    grid = cfg["bench"]["grid"]
    repeats = cfg["bench"]["repeats"]
    if repeats < 1:
        raise ConfigError("bench.repeats must be >= 1")
    try:
        sizes = sorted((int(m), int(n), int(K)) for m, n, K in grid)
    except (TypeError, ValueError):
        raise ConfigError("bench.grid must be a list of [m, n, K] triples") from None
    if any(v < 1 for s in sizes for v in s):
        raise ConfigError("bench.grid sizes must be positive")
    sizes.sort(key=lambda s: (s[0] * s[1] * s[2], s))
    rng = np.random.default_rng(cfg["run"]["seed"])
    rows = []
    for m, n, K in sizes:
        x, w, b = BooleanTensor.random((K, m), rng), BooleanTensor.random((m, n), rng), BooleanTensor.random((n,), rng)
        packed = forward_layer(x, w, b)
        if not np.array_equal(packed, forward_reference(x, w, b)):
            print(f"packed forward differs from reference at m={m} n={n} K={K}", file=sys.stderr)
            return 1
        xp, wp, bp = x.to_pm(), w.to_pm(), b.to_pm()
        w.columns  # build the transposed copy outside the timed region

        def best(fn):
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter_ns()
                fn()
                times.append(time.perf_counter_ns() - t0)
            return min(times)

        packed_ns = best(lambda: forward_layer(x, w, b))
        naive_ns = best(lambda: xp @ wp + bp[None, :])
        rows.append((m, n, K, m * n * K, packed_ns, naive_ns, naive_ns / packed_ns))
    with open(out / "bench.csv", "w") as fh:
        fh.write("m,n,K,work,packed_ns,naive_ns,speedup\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row[:-1]) + f",{row[-1]:.4f}\n")
    for m, n, K, _, p, q, s in rows:
        print(f"m={m} n={n} K={K}: packed {p} ns, naive {q} ns, speedup {s:.2f}")
    return 0


COMMANDS = {"train": cmd_train, "validate": cmd_validate, "equiv": cmd_equiv, "bench": cmd_bench}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="overrides run.seed (and optimizer.seed)")
    common.add_argument("--out", help="output directory (overrides run.out_dir)")
    common.add_argument("--threads", type=int, help="worker threads (default: $BOOLNET_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="boolnet", description="Boolean-weight training and validation tools.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a Boolean MLP")
    sub.add_parser("validate", parents=[common], help="Monte Carlo checks of the error bounds and rate")
    sub.add_parser("equiv", parents=[common], help="optimizer vs error-feedback equivalence check")
    sub.add_parser("bench", parents=[common], help="packed vs unpacked forward timing")
    return parser


def _threads(flag: int | None) -> int:
    if flag is not None:
        value = flag
    else:
        env = os.environ.get("BOOLNET_THREADS")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"BOOLNET_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        threads = _threads(args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    # must precede the first numpy import to take effect
    for var in THREAD_VARS:
        os.environ.setdefault(var, str(threads))
    from .nettrain import DataError

    try:
        overrides = {("run", "seed"): args.seed, ("optimizer", "seed"): args.seed,
                     ("run", "out_dir"): args.out, ("run", "threads"): threads}
        cfg = resolve_config(args.command, args.config, overrides)
        out = Path(cfg["run"]["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "resolved.toml", "wb") as fh:
            tomli_w.dump(cfg, fh)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
