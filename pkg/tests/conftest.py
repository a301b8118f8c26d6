"""Shared fixtures: expensive pipeline runs are computed once per session."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from locmorse.builtins import NAMES, builtin
from locmorse.field import Ball, default_amplitude
from locmorse.lagrange import LagrangeParams, theorem_a_pipeline
from locmorse.pipeline import local_homology

# every builtin; the Lagrange field is analysed at l₁ for equal masses
CASES = {n: builtin(n) for n in NAMES if n != "lagrange"}
CASES["lagrange"] = builtin("lagrange", {"m1": 0.5, "m2": 0.5, "eps": 1.0}, Ball((0.0, 0.0), 0.05))

# criterion number -> list of (part, ok, detail)
ACCEPTANCE: dict[int, list] = {}
TITLES = {
    1: "Lagrange points: local homology at l1..l5",
    2: "closed-form Hessians at the collinear points",
    3: "boundary squares to zero",
    4: "energy identity on counted connections",
    5: "locality of counted connections",
    6: "perturbation invariance and chain maps",
    7: "switching profile",
    8: "agreement with the cubical oracle",
    9: "deterministic reports",
}


@functools.lru_cache(maxsize=None)
def cached_run(name: str, seed: int = 0, offset_check: bool = True, inflate: float = 1.0):
    b = CASES[name]
    amp = inflate * default_amplitude(b.field, b.ball)
    return local_homology(b.field, b.ball, amplitude=amp, seed=seed, isolated=b.isolated,
                          offset_check=offset_check)


@functools.lru_cache(maxsize=None)
def cached_theorem_a(m1: float, m2: float, eps: float, seed: int = 0):
    return theorem_a_pipeline(LagrangeParams(m1, m2, eps), seed=seed)


@pytest.fixture(scope="session")
def run():
    return cached_run


@pytest.fixture(scope="session")
def theorem_a():
    return cached_theorem_a


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def record():
    """``record(n, part, ok, detail)`` files one piece of evidence for acceptance criterion ``n``."""

    def _record(n, part, ok, detail=""):
        ACCEPTANCE.setdefault(n, []).append((part, bool(ok), detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{part} {'ok' if ok else 'FAILED'} ({d})" if d else f"{part} {'ok' if ok else 'FAILED'}"
                           for part, ok, d in parts)
        terminalreporter.write_line(f"criterion {n} {verdict}: {TITLES.get(n, '')} | {detail}")
