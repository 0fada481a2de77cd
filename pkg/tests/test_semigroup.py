import math

import numpy as np
import pytest

from beamnet.conditions import make_conditions, preset
from beamnet.discretization import Mesh, assemble
from beamnet.fields import BumpField, SineField
from beamnet.graph import build_graph, interval, star
from beamnet.semigroup import (dynamic_row_residual, heat_kernel, norm_2_to_inf, positivity_probe,
                               resolved_floor, semigroup_trace, square_comparison, submarkov_onset,
                               ultracontractivity_exponent, wentzell_residual)
from beamnet.traces import EdgewisePolynomial


def build(name, graph, j, n):
    return assemble(graph, preset(name, graph, j), Mesh.uniform(graph, n))


@pytest.fixture(scope="module")
def dirichlet():
    return build("dirichlet", interval(math.pi), 1, 64)


@pytest.fixture(scope="module")
def hinged():
    return build("hinged", interval(math.pi), 2, 32)


@pytest.fixture(scope="module")
def friedrichs():
    return build("friedrichs", star(3), 2, 8)


@pytest.fixture(scope="module")
def dynamic_star():
    return build("dynamic_star", star(3), 2, 16)


def test_kernel_midpoint_series(dirichlet):
    kg = heat_kernel(dirichlet, 1.0, per_edge=65)
    series = 2 / math.pi * sum(math.exp(-k * k) * math.sin(k * math.pi / 2) ** 2 for k in range(1, 40))
    assert series == pytest.approx(0.23428, abs=1e-5)
    assert kg.values[32, 32] == pytest.approx(series, rel=1e-3)
    assert kg.asymmetry() <= 1e-8


def test_kernel_long_time_limit(friedrichs):
    kg = heat_kernel(friedrichs, 50.0, per_edge=17)
    np.testing.assert_allclose(kg.values, 1.0 / friedrichs.graph.total_length, atol=1e-9)


def test_kernel_rejects_nonpositive_time(hinged):
    for fn in (heat_kernel, semigroup_trace, norm_2_to_inf):
        with pytest.raises(ValueError):
            fn(hinged, 0.0)


def test_trace_series(hinged):
    series = sum(math.exp(-k ** 4) for k in range(1, 10))
    assert series == pytest.approx(0.367880, abs=1e-6)
    assert semigroup_trace(hinged, 1.0) == pytest.approx(series, abs=1e-4)


def test_trace_limits_and_monotone(friedrichs):
    assert semigroup_trace(friedrichs, 100.0) == pytest.approx(1.0, abs=1e-9)
    ts = np.geomspace(1e-4, 10, 20)
    tr = [semigroup_trace(friedrichs, t) for t in ts]
    assert all(a >= b for a, b in zip(tr, tr[1:]))


@pytest.mark.parametrize("fixture,t", [("hinged", 0.05), ("dynamic_star", 0.05)])
def test_trace_identity(request, fixture, t):
    op = request.getfixturevalue(fixture)
    kg = heat_kernel(op, t, per_edge=257)
    diag = float(np.diag(kg.values) @ kg.weights)
    if op.conditions.d_d:
        diag += float(np.trace(op.conditions.Pi @ kg.theta))
    assert diag == pytest.approx(semigroup_trace(op, t), rel=1e-2)


def test_semigroup_law_on_kernels(dirichlet):
    half = heat_kernel(dirichlet, 0.5, per_edge=129)
    full = heat_kernel(dirichlet, 1.0, per_edge=129)
    composed = (half.values * half.weights) @ half.values
    inner = slice(10, -10)
    np.testing.assert_allclose(composed[inner, inner], full.values[inner, inner],
                               rtol=1e-2, atol=1e-2 * np.abs(full.values).max())


def test_norm_matches_kernel_diagonal(hinged):
    for t in (1e-3, 1e-1):
        n = norm_2_to_inf(hinged, t, per_edge=129)
        diag = np.diag(heat_kernel(hinged, 2 * t, per_edge=129).values).max()
        assert n ** 2 <= diag * (1 + 1e-9)
        assert n ** 2 == pytest.approx(diag, rel=1e-9)


def test_norm_long_time_limit(friedrichs):
    assert norm_2_to_inf(friedrichs, 80.0) == pytest.approx(1 / math.sqrt(3.0), rel=1e-8)


def test_norm_monotone_and_growth(hinged):
    ts = np.geomspace(1e-6, 1e-3, 8)
    norms = [norm_2_to_inf(hinged, t) for t in ts]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_norm_includes_dynamic_part(dynamic_star):
    assert norm_2_to_inf(dynamic_star, 1.0) > 0


def test_exponent_dirichlet():
    op = build("dirichlet", interval(1.0), 1, 64)
    fit = ultracontractivity_exponent(op, np.geomspace(resolved_floor(op), 1e-2, 12))
    assert fit.bound == -0.25
    assert fit.alpha == pytest.approx(-0.25, abs=0.03)


def test_exponent_hinged():
    op = build("hinged", interval(1.0), 2, 32)
    fit = ultracontractivity_exponent(op, np.geomspace(resolved_floor(op), 1e-4, 12))
    assert fit.alpha == pytest.approx(-0.125, abs=0.03)


def test_exponent_constant_only_spectrum():
    # one element with identified ends: only constants survive
    g = interval(1.0)
    vc = make_conditions(1, np.zeros((2, 0)), (np.ones(2) / math.sqrt(2))[:, None])
    op = assemble(g, vc, Mesh.uniform(g, 1))
    assert op.size == 1
    fit = ultracontractivity_exponent(op, [1e-4, 1e-2, 1.0])
    assert fit.alpha == pytest.approx(0.0, abs=1e-10)


def test_exponent_refuses_unresolved_times(hinged):
    with pytest.raises(ValueError, match="mesh cannot resolve requested times"):
        ultracontractivity_exponent(hinged, [resolved_floor(hinged) / 2, 1e-3])


def test_positivity_second_order(dirichlet):
    g = dirichlet.graph
    f = EdgewisePolynomial(g, [[0.0, math.pi, -1.0]])
    times = np.concatenate([[0.0], np.geomspace(resolved_floor(dirichlet), 5.0, 25)])
    assert min(s.min_u for s in positivity_probe(dirichlet, f, times)) >= -1e-8


def test_positivity_kirchhoff_network():
    # constants are preserved and the flow is positive, so u stays above min f;
    # cubic elements undershoot near the kink of f at small t, hence t >= 1e-2
    g = build_graph([("a", "b", 1.0), ("b", "c", 0.7), ("b", "d", 1.3), ("c", "d", 0.9)])
    op = build("continuity_kirchhoff", g, 1, 64)
    f = EdgewisePolynomial(g, [[0.1, 1.0, -1.0], [0.1], [0.1], [0.1]])
    samples = positivity_probe(op, f, np.geomspace(1e-2, 3.0, 15))
    assert min(s.min_u for s in samples) >= 0.1 - 1e-8


def test_positivity_fails_for_beam():
    op = build("hinged", interval(1.0), 2, 64)
    f = BumpField(op.graph, 0.5, 0.05)
    samples = positivity_probe(op, f, [1e-6, 1e-5, 1e-4 / 2])
    assert all(s.min_u < 0 for s in samples)
    assert all(not s.submarkov for s in samples)


def test_eventual_submarkov(friedrichs):
    f = BumpField(friedrichs.graph, 0.5, 0.3, edge=0)
    samples = positivity_probe(friedrichs, f, np.geomspace(1e-4, 10, 30))
    t0 = submarkov_onset(samples)
    assert t0 is not None and t0 > 1e-4
    later = [s for s in samples if s.t >= t0]
    assert len(later) >= 10 and all(s.submarkov for s in later)


def test_submarkov_onset_none():
    from beamnet.semigroup import PositivitySample
    assert submarkov_onset([PositivitySample(0.1, 0.0, 1.0, True), PositivitySample(0.2, -1, 1, False)]) is None


@pytest.mark.parametrize("name,j", [("laplacian_dynamic", 1), ("dynamic_star", 2)])
def test_wentzell_residual_small(name, j):
    op = build(name, star(3), j, 32)
    for k in range(5):
        assert wentzell_residual(op, k) <= 1e-6


@pytest.mark.parametrize("name", ["point_mass", "point_mass_degenerate"])
def test_wentzell_point_mass(name):
    op = build(name, build_graph([("a", "m", 1.0), ("m", "b", 1.0)]), 2, 16)
    for k in range(5):
        assert wentzell_residual(op, k) <= 1e-6


def test_wentzell_negative_control(dynamic_star):
    rng = np.random.default_rng(3)
    c = rng.standard_normal(dynamic_star.size)
    lam = (c @ dynamic_star.A_red @ c) / (c @ dynamic_star.M_red @ c)
    assert dynamic_row_residual(dynamic_star, c, lam) > 0.1


def test_wentzell_needs_dynamic_part(hinged):
    with pytest.raises(ValueError, match="no dynamic component"):
        wentzell_residual(hinged, 0)


def test_square_comparison_refines():
    coarse = square_comparison(star(3), 16, num_modes=4)
    fine = square_comparison(star(3), 32, num_modes=4)
    assert coarse[0].kernel and fine[0].kernel
    assert fine[0].gap < 1e-8
    for a, b in zip(coarse[1:], fine[1:]):
        assert b.gap < a.gap
        assert b.gap < 1e-2
