"""Property suite run by ``symgraph verify``.

Each instance is enumerated exactly and a list of named checks is run
against it. Checks that need a nonempty set are skipped (not failed) when
the set is empty. ``ent_fn`` lets tests inject a corrupted profile entropy
and see which checks catch it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import entropy_decay_bound
from .constraints import Box, Budget, ConstraintSpec, Spectral
from .exceptions import CapacityError, InvalidStateError
from .graphspace import EdgePartition, Partition, balanced_partition, edge_profiles, partition_from_groups
from .maxent import CONVERGED, ent, maximize_entropy, p_entropy
from .oracle import (
    ExplicitProfiles,
    check_orbit_constancy,
    codes_to_indicators,
    entropy_gap_full_space,
    enumerate_set,
    exact_profile_distribution,
    profile_space_size,
    total_variation,
    verify_conditional_factorization,
)
from .sampler import sample_profile
from .streams import RandomStream

__all__ = ["Instance", "CheckResult", "VerifyReport", "default_instances", "run_suite", "FULL_SPACE_GAP_N4"]

FULL_SPACE_GAP_N4 = 6 * math.log(2) - math.log(20)

PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass(frozen=True)
class Instance:
    name: str
    part: Partition
    spec: ConstraintSpec | None = None


@dataclass(frozen=True)
class CheckResult:
    instance: str
    check: str
    status: str
    detail: str = ""

    def to_dict(self):
        return {"instance": self.instance, "check": self.check, "status": self.status, "detail": self.detail}


@dataclass
class VerifyReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.status != FAIL for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if r.status == FAIL]

    def add(self, instance, check, ok, detail=""):
        status = ok if isinstance(ok, str) else (PASS if ok else FAIL)
        self.results.append(CheckResult(instance, check, status, detail))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": [f"{r.instance}:{r.check}" for r in self.failures],
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_instances() -> list[Instance]:
    """Tiny instances (n <= 6) covering each constraint family and an empty set."""
    two_budget = EdgePartition(5, np.array([0] * 4 + [1] * 6))
    groups = partition_from_groups([0, 0, 1, 1, 2, 2])
    third = (1 / 3, 1 / 3, 1 / 3)
    return [
        Instance("all-graphs-n4-k1", EdgePartition.trivial(4)),
        Instance("all-graphs-n4-k2", balanced_partition(4, 2)),
        Instance("at-most-2-edges-n4", EdgePartition.trivial(4), Box([0], [2])),
        Instance("budget-n5-k2", two_budget, Budget([1, 2], 6)),
        Instance("box-n5-k3", balanced_partition(5, 3), Box([1, 1, 1], [3, 3, 2])),
        Instance("budget-n6-k2", balanced_partition(6, 2), Budget([1, 2], 10)),
        Instance("spectral-n6", groups, Spectral(third, 0, 0.25)),
        Instance("empty-budget-n4", balanced_partition(4, 2), Budget([1, 1], -1)),
    ]


def _member_fn(inst: Instance):
    def member(X):
        M = edge_profiles(X, inst.part)
        if inst.spec is None:
            return np.ones(M.shape[0], dtype=bool)
        return inst.spec.contains_many(M, inst.part)

    return member


def _stirling_checks(report, inst, profiles, ent_fn):
    part = inst.part
    upper = part.k * math.log(part.n)
    gaps = np.array([p_entropy(v, part) - ent_fn(v, part) for v in profiles])
    bad = int(np.sum((gaps < -1e-9) | (gaps > upper + 1e-9)))
    report.add(inst.name, "stirling-gap-bounds", bad == 0,
               f"{bad} of {len(gaps)} profiles outside [0, k ln n]; range [{gaps.min():.4g}, {gaps.max():.4g}]")


def _check_instance(report: VerifyReport, inst: Instance, ent_fn, rng: RandomStream, draws: int):
    name, part = inst.name, inst.part
    value, bound_ok = profile_space_size(part)
    report.add(name, "profile-space-bound", bound_ok, f"{value} <= n^(2k) = {part.n ** (2 * part.k)}")
    try:
        summary = enumerate_set(part, inst.spec, mode="explicit")
    except CapacityError as exc:
        report.add(name, "enumerate", FAIL, str(exc))
        raise
    if summary.empty:
        report.add(name, "empty-set", SKIP, "set is empty; distribution checks skipped")
        return
    report.add(name, "counting-identity", summary.counting_identity_holds(), f"|S| = {summary.size}")

    try:
        probs = exact_profile_distribution(summary, ent_fn=ent_fn)
        report.add(name, "profile-distribution", True, "matches direct counts to 1e-12")
    except InvalidStateError as exc:
        probs = None
        report.add(name, "profile-distribution", False, str(exc))

    ents = np.array([ent_fn(v, part) for v in summary.profiles])
    worst = float(np.max(ents - summary.log_size))
    report.add(name, "log-size-dominates-ent", worst <= 1e-12, f"max Ent(v) - ln|S| = {worst:.3g}")

    X = codes_to_indicators(summary.codes, part.N)
    if X.shape[0] > 4096:
        X = X[np.sort(rng.derive(0).generator.choice(X.shape[0], 4096, replace=False))]
    outside = codes_to_indicators(rng.derive(1).integers(0, 2 ** part.N, size=512).astype(np.uint32), part.N)
    report.add(name, "orbit-constancy",
               check_orbit_constancy(_member_fn(inst), part, np.vstack([X, outside]), 100, rng.derive(2)),
               "membership invariant under 100 within-part permutations")
    report.add(name, "conditional-factorization",
               verify_conditional_factorization(summary, part, families=100, rng=rng.derive(3)),
               "100 random forced-in/forced-out families, exact arithmetic")

    _stirling_checks(report, inst, summary.profiles, ent_fn)

    if isinstance(inst.spec, ExplicitProfiles):
        report.add(name, "solver-grid-optimality", SKIP, "explicit profile lists have no solver")
    else:
        sol = maximize_entropy(part, inst.spec)
        if sol.status != CONVERGED:
            report.add(name, "solver-grid-optimality", False, f"solver status {sol.status}")
        else:
            h_star = p_entropy(sol.m_star, part)
            h_grid = max(p_entropy(v, part) for v in summary.profiles)
            report.add(name, "solver-grid-optimality", h_star >= h_grid - 1e-6,
                       f"H(m*) = {h_star:.10g}, best grid H = {h_grid:.10g}")
            m_round = np.round(sol.m_star)
            e_round = ent_fn(m_round, part)
            slack = [entropy_decay_bound(w, sol.m_star, part) - (ent_fn(w, part) - e_round) for w in summary.profiles]
            bad = int(np.sum(np.array(slack) < -1e-9))
            report.add(name, "entropy-decay-bound", bad == 0, f"{bad} violations over {len(slack)} profiles")

    if probs is not None and draws > 0:
        V = sample_profile(part, inst.spec, "enumeration", rng.derive(4), size=draws)
        keys, counts = np.unique(V, axis=0, return_counts=True)
        emp = {tuple(int(x) for x in v): c / draws for v, c in zip(keys, counts)}
        tv = total_variation(emp, probs)
        limit = max(0.02, 1.5 * math.sqrt(2 * len(probs) / (math.pi * draws)))
        report.add(name, "sampler-profile-tv", tv <= limit, f"TV = {tv:.4g} over {draws} draws (limit {limit:.3g})")


def run_suite(instances: list[Instance] | None = None, ent_fn=ent, seed: int = 0, draws: int = 100_000,
              include_global: bool = True) -> VerifyReport:
    """Run every check on every instance; raises :class:`CapacityError` above the enumeration cap."""
    report = VerifyReport()
    root = RandomStream(seed)
    for j, inst in enumerate(default_instances() if instances is None else instances):
        _check_instance(report, inst, ent_fn, root.derive(j), draws)
    if include_global:
        gap = entropy_gap_full_space(EdgePartition.trivial(4))
        report.add("all-graphs-n4-k1", "full-space-gap", abs(gap - FULL_SPACE_GAP_N4) <= 1e-9,
                   f"gap = {gap:.12f}, expected 6 ln 2 - ln 20 = {FULL_SPACE_GAP_N4:.12f}")
        gaps = [entropy_gap_full_space(balanced_partition(12, k)) for k in (1, 2, 3)]
        report.add("all-graphs-n12", "full-space-gap-grows-with-k", gaps[0] < gaps[1] < gaps[2],
                   "gaps " + ", ".join(f"{g:.4f}" for g in gaps))
    return report
