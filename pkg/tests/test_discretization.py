import math

import numpy as np
import pytest
import sympy
from scipy.optimize import brentq

from beamnet.conditions import complement, make_conditions, orthonormalize, preset
from beamnet.discretization import (DofMap, HermiteFunction, Mesh, assemble, constraint_nullspace,
                                    element_matrices, evaluation_matrix, hermite_shape_functions, project)
from beamnet.fields import SineField
from beamnet.graph import Side, build_graph, interval, star
from beamnet.numerics import asymmetry
from beamnet.traces import EdgewisePolynomial, gamma_lower

X, H = sympy.symbols("x h", positive=True)


def _symbolic_hermite(j):
    """Hermite basis on [0, h] with physical-derivative DOFs, solved symbolically."""
    coeffs = sympy.symbols(f"a0:{2 * j}")
    basis = []
    for s in (0, 1):
        for order in range(j):
            poly = sum(c * X ** i for i, c in enumerate(coeffs))
            eqs = []
            for s2 in (0, 1):
                for m in range(j):
                    target = 1 if (s2, m) == (s, order) else 0
                    eqs.append(sympy.diff(poly, X, m).subs(X, s2 * H) - target)
            sol = sympy.solve(eqs, coeffs)
            basis.append(sympy.expand(poly.subs(sol)))
    return basis


@pytest.mark.parametrize("j", [1, 2, 3])
def test_element_matrices_match_exact_integration(j):
    basis = _symbolic_hermite(j)
    n = 2 * j
    hval, pval = 0.37, 1.7
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            k = sympy.integrate(sympy.diff(basis[a], X, j) * sympy.diff(basis[b], X, j), (X, 0, H))
            m = sympy.integrate(basis[a] * basis[b], (X, 0, H))
            K[a, b] = float(k.subs(H, hval))
            M[a, b] = float(m.subs(H, hval)) / pval
    stiff, mass = element_matrices(j, hval, pval)
    np.testing.assert_allclose(stiff, K, rtol=1e-11, atol=1e-12 * np.abs(K).max())
    np.testing.assert_allclose(mass, M, rtol=1e-11, atol=1e-14)


def test_element_matrices_cubic_unit():
    stiff, mass = element_matrices(2, 1.0)
    np.testing.assert_allclose(stiff, [[12, 6, -12, 6], [6, 4, -6, 2], [-12, -6, 12, -6], [6, 2, -6, 4]],
                               atol=1e-12)
    np.testing.assert_allclose(420 * mass, [[156, 22, 54, -13], [22, 4, 13, -3], [54, 13, 156, -22],
                                            [-13, -3, -22, 4]], atol=1e-10)


def test_element_matrices_linear_unit():
    stiff, mass = element_matrices(1, 1.0)
    np.testing.assert_allclose(stiff, [[1, -1], [-1, 1]], atol=1e-14)
    np.testing.assert_allclose(6 * mass, [[2, 1], [1, 2]], atol=1e-14)


def test_element_matrices_reject_bad_input():
    with pytest.raises(ValueError):
        element_matrices(2, 0.0)


def test_shape_functions_explicit():
    lin = hermite_shape_functions(1)
    np.testing.assert_allclose(lin[0].coef, [1, -1], atol=1e-14)
    np.testing.assert_allclose(lin[1].coef, [0, 1], atol=1e-14)
    cub = hermite_shape_functions(2)
    for poly, expected in zip(cub, ([1, 0, -3, 2], [0, 1, -2, 1], [0, 0, 3, -2], [0, 0, -1, 1])):
        np.testing.assert_allclose(poly.coef, expected, atol=1e-13)


def test_shape_functions_interpolation_conditions():
    j = 3
    shapes = hermite_shape_functions(j)
    for i, N in enumerate(shapes):
        for s in (0, 1):
            for m in range(j):
                want = 1.0 if i == s * j + m else 0.0
                assert N.deriv(m)(float(s)) == pytest.approx(want, abs=1e-12)


def test_constraint_nullspace_examples():
    np.testing.assert_allclose(np.abs(constraint_nullspace(np.array([[1.0, 0.0]]))), [[0.0], [1.0]])
    Z = constraint_nullspace(np.zeros((1, 3)))
    np.testing.assert_allclose(Z.T @ Z, np.eye(3), atol=1e-14)
    assert constraint_nullspace(np.array([[1.0, 2.0], [3.0, 4.0]])).shape == (2, 0)


def test_clamped_single_element_has_no_dofs():
    g = interval(1.0)
    with pytest.raises(ValueError, match="no degrees of freedom"):
        assemble(g, preset("clamped", g, 2), Mesh.uniform(g, 1))


def test_hinged_dimension_and_structure():
    g = interval(math.pi)
    op = assemble(g, preset("hinged", g, 2), Mesh.uniform(g, 8))
    assert op.dofs.size == 18 and op.size == 16
    assert asymmetry(op.A_red) <= 1e-10
    assert np.linalg.eigvalsh(op.M_red).min() > 0


def test_laplacian_dynamic_dimension():
    g = star(3)
    op = assemble(g, preset("laplacian_dynamic", g, 1), Mesh.uniform(g, 4))
    assert op.size == 3 * 3 + 4
    assert op.Gd.shape == (1, op.size)
    # the Pi-weighted row: M_red exceeds the bare L2 mass by theta^2
    c = np.linalg.lstsq(op.Z, np.ones(op.dofs.size), rcond=None)[0]
    assert c @ op.M_red @ c == pytest.approx(3.0 + 3.0, rel=1e-12)  # |G| + |theta|^2, theta = sqrt(3)


@pytest.mark.parametrize("name,j,g", [("friedrichs", 2, star(3)), ("dynamic_star", 2, star(3)),
                                      ("continuity_kirchhoff", 3, star(3)),
                                      ("point_mass", 2, build_graph([("a", "m", 1.0), ("m", "b", 1.0)]))])
def test_constraint_holds(name, j, g):
    vc = preset(name, g, j)
    op = assemble(g, vc, Mesh.uniform(g, 4))
    residual = complement(vc.basis_Y).T @ op.G @ op.Z
    assert np.abs(residual).max() <= 1e-10


def test_hinged_eigenvalues():
    g = interval(math.pi)
    op = assemble(g, preset("hinged", g, 2), Mesh.uniform(g, 32))
    lam = op.eigenbasis().values[:3]
    np.testing.assert_allclose(lam, [1, 16, 81], rtol=1e-3)
    assert op.eigenbasis().residual(op.A_red, op.M_red) <= 1e-8
    assert op.eigenbasis().orthonormality_error(op.M_red) <= 1e-8


def test_clamped_first_eigenvalue_matches_root_oracle():
    mu = brentq(lambda m: math.cos(m) * math.cosh(m) - 1.0, 4.0, 5.0, xtol=1e-14)
    assert mu == pytest.approx(4.730041, abs=1e-6)
    g = interval(1.0)
    op = assemble(g, preset("clamped", g, 2), Mesh.uniform(g, 32))
    assert op.eigenbasis().values[0] == pytest.approx(mu ** 4, rel=2e-3)


def _interpolate(op, f):
    full = np.zeros(op.dofs.size)
    for e in range(op.graph.num_edges):
        b = op.mesh.breakpoints[e]
        for i, x in enumerate(b):
            for m in range(op.j):
                full[op.dofs.node(e, i, m)] = f.derivative(e, m, np.array([x]))[0]
    return op.Z.T @ full


def test_galerkin_consistency_rate():
    g = interval(math.pi)
    f = SineField(g, 1)
    errors = []
    for n in (4, 8, 16, 32):
        op = assemble(g, preset("hinged", g, 2), Mesh.uniform(g, n))
        c = _interpolate(op, f)
        errors.append(abs((c @ op.A_red @ c) / (c @ op.M_red @ c) - 1.0))
    assert all(a > b for a, b in zip(errors, errors[1:]))
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert min(rates) >= 3.5


def _random_conditions(rng, j, E, symmetric):
    n = 2 * j * E
    q = orthonormalize(list(rng.standard_normal((n, n))))
    # an asymmetric pair needs a block of size >= 2 to be asymmetric at all
    dd = int(rng.integers(0, n // 2 + 1))
    ds = int(rng.integers(1 if symmetric else 2, n - dd + 1))
    S = rng.standard_normal((ds, ds))
    D = rng.standard_normal((dd, dd))
    if symmetric:
        S, D = S + S.T, D + D.T
    P = rng.standard_normal((dd, dd))
    return make_conditions(j, q[:, :dd], q[:, dd:dd + ds], S=S, D=D, Pi=P @ P.T + np.eye(dd))


@pytest.mark.parametrize("j", [1, 2])
def test_symmetry_equivalence(j):
    rng = np.random.default_rng(100 + j)
    g = build_graph([("a", "b", 1.0), ("b", "c", 0.8)])
    for trial in range(20):
        symmetric = trial % 2 == 0
        vc = _random_conditions(rng, j, 2, symmetric)
        op = assemble(g, vc, Mesh.uniform(g, 3))
        asym = asymmetry(op.A_red)
        if symmetric:
            assert asym <= 1e-10
        else:
            assert asym > 1e-6


def test_semidefinite_conditions_give_nonnegative_spectrum():
    rng = np.random.default_rng(7)
    g = star(3)
    for _ in range(5):
        vc = _random_conditions(rng, 2, 3, True)
        S = -(vc.S @ vc.S.T)
        D = -(vc.D @ vc.D.T)
        vc = make_conditions(2, vc.basis_Yd, vc.basis_Ys, S=S, D=D, Pi=vc.Pi)
        op = assemble(g, vc, Mesh.uniform(g, 4))
        assert op.eigenbasis().values[0] >= -1e-8


def test_hinged_natural_condition():
    g = interval(math.pi)
    op = assemble(g, preset("hinged", g, 2), Mesh.uniform(g, 32))
    u = op.function(op.eigenbasis().vectors[:, 0])
    scale = abs(u.derivative(0, 2, math.pi / 2))
    for side in (Side.START, Side.END):
        assert abs(u.endpoint_derivative(0, side, 0)) <= 1e-12
        assert abs(u.endpoint_derivative(0, side, 2)) <= 1e-2 * scale


def test_dynamic_star_natural_condition_at_centre():
    # u'' at the dynamic vertex equals minus the mean outward slope
    g = star(3)
    op = assemble(g, preset("dynamic_star", g, 2), Mesh.uniform(g, 32))
    basis = op.eigenbasis()
    for k in (3, 4):
        u = op.function(basis.vectors[:, k])
        second = [u.endpoint_derivative(e, Side.START, 2) for e in range(3)]
        slopes = [-u.endpoint_derivative(e, Side.START, 1) for e in range(3)]
        target = -sum(slopes) / 3
        scale = max(abs(u.derivative(0, 2, 0.5)), abs(target), 1.0)
        assert max(abs(s - target) for s in second) <= 2e-2 * scale


def test_projection_reproduces_space_members():
    # a per-edge cubic is in the free j=2 space, so projection is exact
    g = build_graph([("a", "b", 1.0), ("b", "c", 2.0)])
    op = assemble(g, preset("free", g, 2), Mesh.uniform(g, 5))
    f = EdgewisePolynomial(g, [[1, -2, 0.5, 0.25], [0, 1, 1, -0.1]])
    c, residual = project(op, f)
    assert residual <= 1e-7
    pts = [(0, 0.3), (1, 1.7), (1, 2.0)]
    ev = evaluation_matrix(op, pts) @ op.Z
    expected = [f.derivative(e, 0, x) for e, x in pts]
    np.testing.assert_allclose(ev @ c, expected, atol=1e-10)
    u = op.function(c)
    assert u.derivative(1, 3, 0.5) == pytest.approx(6 * -0.1, rel=1e-9)
    with pytest.raises(ValueError, match="exceeds"):
        u.derivative(0, 4, 0.1)


def test_projection_dynamic_part_uses_trace():
    g = star(3)
    op = assemble(g, preset("laplacian_dynamic", g, 1), Mesh.uniform(g, 4))
    f = EdgewisePolynomial(g, [[2.0, 1.0]] * 3)  # value 2 at the centre on every edge
    c, residual = project(op, f)
    assert residual <= 1e-10
    theta = op.theta(c)
    expected = op.conditions.basis_Yd.T @ gamma_lower(f, 1)
    np.testing.assert_allclose(theta, expected, atol=1e-10)


def test_dofmap_numbering():
    g = build_graph([("a", "b", 1.0), ("b", "c", 1.0)])
    dm = DofMap(2, Mesh.uniform(g, [2, 3]))
    assert dm.size == 2 * 3 + 2 * 4
    assert dm.node(1, 0, 0) == 6
    np.testing.assert_array_equal(dm.element(0, 1), [2, 3, 4, 5])


def test_mesh_validation():
    g = interval(1.0)
    with pytest.raises(ValueError):
        Mesh.uniform(g, 0)
    with pytest.raises(ValueError):
        Mesh.uniform(g, [2, 2])
    k, xi, h = Mesh.uniform(g, 4).locate(0, [0.0, 0.3, 1.0])
    np.testing.assert_array_equal(k, [0, 1, 3])
    np.testing.assert_allclose(xi, [0.0, 0.2, 1.0])


def test_hermite_function_endpoint():
    g = interval(2.0)
    op = assemble(g, preset("free", g, 2), Mesh.uniform(g, 3))
    f = EdgewisePolynomial(g, [[0, 0, 0, 1.0]])
    c, _ = project(op, f)
    u = HermiteFunction(op, op.full(c))
    assert u.endpoint_derivative(0, Side.END, 1) == pytest.approx(12.0, rel=1e-9)
