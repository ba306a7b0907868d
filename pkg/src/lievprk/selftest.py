"""Fast invariant suite behind ``lievprk selftest``."""

from __future__ import annotations

import sys
import time

import numpy as np

from . import checks
from .retraction import BERNOULLI


def corrupted_bernoulli() -> np.ndarray:
    """Bernoulli table with ``B_2`` perturbed; only the series check should notice."""
    table = BERNOULLI.copy()
    table[2] *= 1.01
    return table


def selftest_checks(corrupt_bernoulli: bool = False) -> list:
    """The ``(name, thunk)`` pairs run by :func:`run_selftest`."""
    bernoulli = corrupted_bernoulli() if corrupt_bernoulli else None
    return [
        ("retraction_identities", checks.check_retraction_identities),
        ("dexp_inv", lambda: checks.check_dexp_inv(bernoulli=bernoulli)),
        ("skew_sqrt", checks.check_skew_sqrt),
        ("oracle_equivalence", checks.check_oracle_equivalence),
        ("dlp", checks.check_dlp),
        ("symplecticity", lambda: checks.check_symplecticity(n=1)),
        ("gradients", checks.check_gradients),
    ]


def run_selftest(corrupt_bernoulli: bool = False, stream=None, only=None) -> int:
    """Run every group (or the groups named in ``only``), print one line each, and return 0 iff all pass."""
    stream = sys.stdout if stream is None else stream
    groups = selftest_checks(corrupt_bernoulli)
    if only:
        unknown = set(only) - {name for name, _ in groups}
        if unknown:
            raise ValueError(f"unknown selftest groups: {sorted(unknown)}")
        groups = [(name, thunk) for name, thunk in groups if name in only]
    start = time.perf_counter()
    failed = []
    for name, thunk in groups:
        try:
            result = thunk()
        except Exception as exc:  # a crash counts as a failed group
            result = checks.CheckResult(name, False, f"raised {type(exc).__name__}: {exc}")
        print(result.line(), file=stream, flush=True)
        if not result.passed:
            failed.append(name)
    elapsed = time.perf_counter() - start
    if failed:
        print(f"selftest FAILED: {', '.join(failed)} ({elapsed:.1f} s)", file=stream)
        return 1
    print(f"selftest passed ({elapsed:.1f} s)", file=stream)
    return 0
