"""``symgraph`` command line runner.

Subcommands ``solve``, ``sample``, ``couple``, ``diagnose`` and ``verify``
read a JSON config (see :mod:`symgraph.config`), apply flag overrides and
write JSON / CSV under ``--out``. Every file carries the config hash, seed
and package version; re-running with the same config and seed reproduces
the files byte for byte, whatever ``--jobs`` is.

Exit codes: 0 ok, 1 config error, 2 infeasible, 3 iteration limit,
4 capacity, 5 a verify check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .analysis import concentration_bound, diagnose, sandwich_delta
from .config import ConfigError, ExperimentConfig, load_config
from .coupling import Sandwich, summarize
from .exceptions import CapacityError, EmptySetError, InvalidInputError, InvalidStrategyError
from .maxent import CONVERGED, INFEASIBLE, ITERATION_LIMIT, maximize_entropy
from .sampler import build_profile_sampler, sample_within_parts
from .streams import RandomStream
from .verify import Instance, run_suite

__all__ = ["main", "run_solve", "run_sample", "run_couple", "run_diagnose", "run_verify", "EXIT"]

EXIT = {"ok": 0, "config": 1, "infeasible": 2, "iteration-limit": 3, "capacity": 4, "check-failed": 5}
SAMPLE_CHUNK = 4096
_STATUS_EXIT = {CONVERGED: 0, INFEASIBLE: 2, ITERATION_LIMIT: 3}


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.content_hash(), "seed": cfg.seed, "version": __version__}


def _stamp(cfg) -> str:
    m = _meta(cfg)
    return f"# config_hash={m['config_hash']} seed={m['seed']} version={m['version']}\n"


def _clean(x):
    # non-finite floats (e.g. an overflowing bound) become null
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(payload), fh, sort_keys=True, indent=2, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _prepare(cfg):
    part = cfg.build_partition()
    return part, cfg.build_spec(part)


def _solve(cfg, part, spec):
    sol = maximize_entropy(part, spec)
    report = diagnose(sol.m_star, part, cfg.epsilon) if sol.converged else None
    return sol, report


def _solution_dict(sol):
    d = sol.to_dict()
    d["kkt_residual"] = _finite(d["kkt_residual"])
    d["objective"] = _finite(d["objective"])
    return d


def run_solve(cfg: ExperimentConfig, out: str) -> int:
    part, spec = _prepare(cfg)
    sol, report = _solve(cfg, part, spec)
    _write_json(os.path.join(out, "solve.json"), {
        "meta": _meta(cfg),
        "solution": _solution_dict(sol),
        "diagnostics": None if report is None else report.to_dict(),
    })
    return _STATUS_EXIT[sol.status]


def run_diagnose(cfg: ExperimentConfig, out: str) -> int:
    part, spec = _prepare(cfg)
    sol, report = _solve(cfg, part, spec)
    bounds = None
    if report is not None and report.lambda_cond is not None and cfg.epsilon is not None:
        conc, conc_ok = concentration_bound(cfg.epsilon, report.mu, report.lambda_cond)
        delta, delta_ok = sandwich_delta(cfg.epsilon, report.mu, report.lambda_cond)
        bounds = {"epsilon": cfg.epsilon, "concentration_bound": conc, "concentration_valid": conc_ok,
                  "sandwich_delta": delta, "sandwich_valid": delta_ok}
    _write_json(os.path.join(out, "diagnose.json"), {
        "meta": _meta(cfg),
        "solution": _solution_dict(sol),
        "diagnostics": None if report is None else report.to_dict(),
        "bounds": bounds,
    })
    return _STATUS_EXIT[sol.status]


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_sample(cfg: ExperimentConfig, out: str) -> int:
    if cfg.strategy == "mcmc" and not cfg.allow_approx:
        raise ConfigError("strategy", "mcmc draws are approximate; pass --allow-approx to use them")
    part, spec = _prepare(cfg)
    options = {k: v for k, v in cfg.mcmc.items() if v is not None} if cfg.strategy == "mcmc" else {}
    sampler = build_profile_sampler(part, spec, cfg.strategy, cfg.cap, **options)
    root = RandomStream(cfg.seed)
    trials = cfg.trials
    chunks = [range(a, min(a + SAMPLE_CHUNK, trials)) for a in range(0, trials, SAMPLE_CHUNK)]
    chain = sampler.sample(root.derive(1), trials) if (not sampler.exact and trials) else None

    def work(r):
        rng = root.derive(0, r.start // SAMPLE_CHUNK)
        V = sampler.sample(rng, len(r)) if chain is None else chain[r.start:r.stop]
        return V, sample_within_parts(V, part, rng)

    results = _map(work, chunks, cfg.jobs)
    stamp = _stamp(cfg)
    with open(os.path.join(out, "sample_profiles.csv"), "w", newline="") as fh:
        fh.write(stamp)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw_index"] + [f"v_{i + 1}" for i in range(part.k)])
        i = 0
        for V, _ in results:
            for row in V.tolist():
                w.writerow([i] + row)
                i += 1
    with open(os.path.join(out, "sample_graphs.txt"), "w", newline="\n") as fh:
        fh.write(stamp)
        fh.write(f"# N={part.N}; one line per draw: draw_index then present edge indices\n")
        i = 0
        for _, X in results:
            buf = io.StringIO()
            for x in X:
                buf.write(" ".join([str(i)] + [str(e) for e in np.flatnonzero(x).tolist()]))
                buf.write("\n")
                i += 1
            fh.write(buf.getvalue())
    V_all = np.concatenate([V for V, _ in results]) if results else np.zeros((0, part.k))
    _write_json(os.path.join(out, "sample_summary.json"), {
        "meta": _meta(cfg),
        "trials": trials,
        "strategy": cfg.strategy,
        "exact": bool(sampler.exact),
        "log_size": _finite(getattr(sampler, "log_Z", None)),
        "mean_profile": V_all.mean(axis=0).tolist() if trials else None,
    })
    return 0


def run_couple(cfg: ExperimentConfig, out: str) -> int:
    if cfg.epsilon is None:
        raise ConfigError("epsilon", "couple needs epsilon (config or --epsilon)")
    if cfg.strategy == "mcmc" and not cfg.allow_approx:
        raise ConfigError("strategy", "mcmc draws are approximate; pass --allow-approx to use them")
    part, spec = _prepare(cfg)
    sol = maximize_entropy(part, spec)
    if sol.status != CONVERGED:
        _write_json(os.path.join(out, "couple_summary.json"), {"meta": _meta(cfg), "solution": _solution_dict(sol)})
        return _STATUS_EXIT[sol.status]
    options = {k: v for k, v in cfg.mcmc.items() if v is not None} if cfg.strategy == "mcmc" else {}
    sampler = build_profile_sampler(part, spec, cfg.strategy, cfg.cap, **options)
    sw = Sandwich(part, spec, cfg.epsilon, cfg.strategy, solution=sol, sampler=sampler)
    batch = sw.run(cfg.trials, RandomStream(cfg.seed), jobs=cfg.jobs)
    with open(os.path.join(out, "couple_trials.csv"), "w", newline="") as fh:
        fh.write(_stamp(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_index", "holds", "per_part_holds", "size_g_minus", "size_g", "size_g_plus"])
        sizes = (batch.g_minus.sum(1).tolist(), batch.g.sum(1).tolist(), batch.g_plus.sum(1).tolist())
        for t in range(len(batch)):
            bits = "".join("1" if b else "0" for b in batch.per_part_holds[t])
            w.writerow([t, int(batch.holds[t]), bits, sizes[0][t], sizes[1][t], sizes[2][t]])
    summary = summarize(sw, batch) if len(batch) else {
        "trials": 0, "rate": None, "ci_halfwidth": None, "degenerate_ci": True,
        "bound_delta": sw.bound_delta()[0], "valid": sw.bound_delta()[1], "exact_marginals": sw.exact,
        "flags": diagnose(sol.m_star, part, cfg.epsilon).flags,
    }
    summary["epsilon"] = cfg.epsilon
    summary["meets_bound"] = None if summary["rate"] is None else bool(
        summary["rate"] >= 1 - summary["bound_delta"])
    _write_json(os.path.join(out, "couple_summary.json"), {"meta": _meta(cfg), "summary": summary})
    return 0


def run_verify(cfg: ExperimentConfig | None, out: str, seed: int = 0) -> int:
    if cfg is None:
        report = run_suite(seed=seed)
        meta = {"config_hash": None, "seed": seed, "version": __version__}
    else:
        part, spec = _prepare(cfg)
        report = run_suite([Instance("config", part, spec)], seed=cfg.seed, include_global=False)
        meta = _meta(cfg)
    _write_json(os.path.join(out, "verify.json"), {"meta": meta, **report.to_dict()})
    for r in report.results:
        print(f"{r.status.upper():4}  {r.instance}:{r.check}  {r.detail}")
    return 0 if report.passed else EXIT["check-failed"]


_COMMANDS = {"solve": run_solve, "sample": run_sample, "couple": run_couple, "diagnose": run_diagnose}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symgraph", description="Entropic optimizer, exact sampler and sandwich coupling for symmetric graph sets.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "sample", "couple", "diagnose", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--trials", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--strategy", choices=["enum", "dp", "mcmc"])
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output directory (default: config 'out')")
        p.add_argument("--allow-approx", action="store_true", help="accept mcmc (approximate) profile draws")
    return ap


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    d = cfg.to_dict()
    for flag, key in (("seed", "seed"), ("trials", "trials"), ("epsilon", "epsilon"), ("strategy", "strategy"),
                      ("jobs", "jobs"), ("out", "out")):
        v = getattr(args, flag)
        if v is not None:
            d[key] = v
    if args.allow_approx:
        d["allow_approx"] = True
    return ExperimentConfig.from_dict(d, base_dir=cfg.base_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = _apply_overrides(load_config(args.config), args)
        out = args.out or (cfg.out if cfg is not None else "out")
        os.makedirs(out, exist_ok=True)
        if args.command == "verify":
            seed = args.seed if args.seed is not None else 0
            return run_verify(cfg, out, seed if cfg is None else cfg.seed)
        return _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT["config"]
    except (InvalidInputError, InvalidStrategyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT["config"]
    except EmptySetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT["infeasible"]
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT["capacity"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
