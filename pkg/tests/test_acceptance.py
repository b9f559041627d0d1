"""Acceptance gate: every registered criterion at its declared tolerance.

One test per criterion; each prints its PASS/FAIL line.  Heavy artifacts
(the 1e7 reference orbit, the 2048-grid sweep) are shared through the
session-scoped suite.  Run with `pytest tests/test_acceptance.py -v -s`.
"""

import pytest

from toruslab.experiments import AcceptanceSuite


@pytest.fixture(scope="module")
def suite():
    return AcceptanceSuite()


def _check(result):
    print()
    print(result.line())
    assert result.passed, result.details


def test_criterion_01_lyapunov_exactness(suite):
    _check(suite.criterion_1())


def test_criterion_02_metric_axioms(suite):
    _check(suite.criterion_2())


def test_criterion_03_invariance_defect(suite):
    _check(suite.criterion_3())


def test_criterion_04_lebesgue_rate_zero(suite):
    _check(suite.criterion_4())


def test_criterion_05_dirac_rate(suite):
    _check(suite.criterion_5())


def test_criterion_06_entropy_pipeline(suite):
    _check(suite.criterion_6())


def test_criterion_07_cylinder_count_bound(suite):
    _check(suite.criterion_7())


def test_criterion_08_entropy_integral_guard(suite):
    _check(suite.criterion_8())


def test_criterion_09_mixture_affinity(suite):
    _check(suite.criterion_9())


def test_criterion_10_perturbed_robustness(suite):
    _check(suite.criterion_10())
