import math

import numpy as np
import pytest

from jumpattract.compare import compare_correlations, shell_average
from jumpattract.kernels import TorusDomain
from jumpattract.simulator import CorrelationEstimate


def estimate(g, se, edges):
    return CorrelationEstimate(0.5, 0.5, 0.01, np.asarray(edges, float), np.asarray(g, float),
                               np.asarray(se, float), np.zeros(len(g)), 0, 8)


def test_shell_average_of_constant(line):
    edges = np.linspace(0, 5, 11)
    assert np.allclose(shell_average(line, np.full(line.shape, 0.3), edges), 0.3, atol=1e-15)
    dom = TorusDomain(2, 10.0, 32)
    assert np.allclose(shell_average(dom, np.full(dom.shape, 0.3), edges), 0.3, atol=1e-15)


def test_shell_average_of_smooth_profile(line):
    table = np.exp(-(line.displacements[:, 0] ** 2) / 2)
    edges = np.linspace(0, 4, 9)
    exact = [math.sqrt(math.pi / 2) * (math.erf(b / math.sqrt(2)) - math.erf(a / math.sqrt(2))) / (b - a)
             for a, b in zip(edges[:-1], edges[1:])]
    assert np.allclose(shell_average(line, table, edges, samples=64), exact, atol=2e-3)


def test_comparison_counts_bins():
    edges = np.linspace(0, 4, 5)
    table = np.full((128,), 0.25)
    dom = TorusDomain(1, 20.0, 128)
    ok = compare_correlations(estimate([0.25, 0.26, 0.24, 0.25], [0.01] * 4, edges), dom, table)
    assert ok.status == "PASS" and ok.max_abs_z == pytest.approx(1.0)
    bad = compare_correlations(estimate([0.25, 0.40, 0.24, 0.25], [0.01] * 4, edges), dom, table)
    assert bad.status == "FAIL" and bad.fraction_within == 0.75


def test_zero_error_bins():
    edges = np.linspace(0, 2, 3)
    dom = TorusDomain(1, 20.0, 128)
    table = np.full((128,), 0.25)
    res = compare_correlations(estimate([0.25, 0.3], [0.0, 0.0], edges), dom, table)
    assert res.z[0] == 0.0 and np.isinf(res.z[1])
