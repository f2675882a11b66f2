import json

import numpy as np
import pytest

from gridlearn.optmodel import (
    DimensionMismatch,
    MissingParameter,
    ParameterInQuadraticTerm,
    ProblemBuilder,
    build_problem,
    builder_from_problem,
    dump_document,
    dot,
    load_document,
    substitute_parameters,
    validate,
)
from gridlearn.solver import SolverOptions, solve


def two_var_lp():
    """min x1+x2 s.t. x1+x2 >= y, x >= 0, scalar parameter y."""
    b = ProblemBuilder()
    x = b.variable("x", 2, lb=0.0)
    y = b.parameter("y", 1)
    b.constrain(np.ones(2)[None, :] @ x.expr() >= y.expr(), "cover")
    b.cost_linear(dot([1.0, 1.0], x))
    return b.lower()


class TestBuildProblem:
    def test_normalisation_example(self):
        prob = two_var_lp()
        assert prob.n_I == 0
        assert prob.n_z == 2
        # rows: cover (1) + x[lb] (2)
        assert prob.n_ineq == 3
        G = prob.G.toarray()
        blk, a0, a1 = prob.row_names["cover"]
        assert blk == "ineq"
        np.testing.assert_allclose(G[a0], [-1.0, -1.0])
        slot, dim = prob.param_names["y"]
        Hy = prob.Hp[slot].toarray()
        np.testing.assert_allclose(Hy[a0], [-1.0])
        np.testing.assert_allclose(prob.q, [1.0, 1.0])
        # bound rows -x <= 0
        blk, b0, b1 = prob.row_names["x[lb]"]
        np.testing.assert_allclose(G[b0:b1], -np.eye(2))
        np.testing.assert_allclose(prob.h[b0:b1], [0.0, 0.0])

    def test_parameter_in_quadratic_term(self):
        b = ProblemBuilder()
        x = b.variable("x", 1)
        y = b.parameter("y", 1)
        with pytest.raises(ParameterInQuadraticTerm):
            b.cost_quadratic(x, y, 1.0)

    def test_binary_reordering_and_bounds(self):
        b = ProblemBuilder()
        xc = b.variable("xc", 2, lb=0.0)
        u = b.variable("u", 3, binary=True)
        b.constrain(xc.expr() + np.ones((2, 3)) @ u.expr() <= 4.0, "mix")
        b.cost_linear(dot([1, 1], xc))
        prob = b.lower()
        assert prob.n_I == 3
        assert prob.var_names["u"] == (0, 3)
        assert prob.var_names["xc"] == (3, 5)
        # {0,1} box rows exist for each binary column
        assert not validate(prob)

    def test_validate_flags_missing_binary_bounds(self):
        b = ProblemBuilder()
        u = b.variable("u", 2, binary=True)
        b.cost_linear(dot([1, 1], u))
        prob = b.lower()
        # hand-delete the upper bound rows
        blk, a0, a1 = prob.row_names["u[ub]"]
        keep = np.ones(prob.n_ineq, dtype=bool)
        keep[a0:a1] = False
        prob.G = prob.G[keep]
        prob.h = prob.h[keep]
        prob.Hp = [H[keep] for H in prob.Hp]
        prob.row_names = {"u[lb]": prob.row_names["u[lb]"]}
        report = validate(prob)
        assert any(v.code == "MissingBinaryBounds" for v in report)

    def test_validate_flags_non_psd(self):
        b = ProblemBuilder()
        x = b.variable("x", 1)
        b.cost_quadratic(x, x, -0.1)
        prob = b.lower(check_psd=False)
        report = validate(prob)
        assert any(v.code == "NonPSDObjective" for v in report)

    def test_clean_problem_validates_empty(self):
        assert validate(two_var_lp()) == []


class TestSubstitution:
    def test_substitute_example(self):
        prob = two_var_lp()
        conc = substitute_parameters(prob, {"y": [2.0]})
        blk, a0, a1 = prob.row_names["cover"]
        np.testing.assert_allclose(conc.h[a0], -2.0)

    def test_zero_values_reproduce_base(self):
        prob = two_var_lp()
        conc = substitute_parameters(prob, {"y": [0.0]})
        np.testing.assert_array_equal(conc.h, prob.h)
        np.testing.assert_array_equal(conc.b, prob.b)
        np.testing.assert_array_equal(conc.q, prob.q)

    def test_wrong_length_raises(self):
        prob = two_var_lp()
        with pytest.raises(DimensionMismatch):
            substitute_parameters(prob, {"y": [1.0, 2.0]})

    def test_missing_parameter(self):
        prob = two_var_lp()
        with pytest.raises(MissingParameter):
            substitute_parameters(prob, {})

    def test_substitution_linearity(self):
        rng = np.random.default_rng(0)
        prob = two_var_lp()
        for _ in range(20):
            ya, yb = rng.normal(size=1), rng.normal(size=1)
            ca = substitute_parameters(prob, {"y": ya})
            cb = substitute_parameters(prob, {"y": yb})
            cab = substitute_parameters(prob, {"y": ya + yb})
            np.testing.assert_array_equal(cab.h, ca.h + cb.h - prob.h)


def random_lp_spec(rng, n, m):
    """A bounded feasible LP with a known interior point."""
    x0 = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    h = G @ x0 + rng.uniform(0.5, 2.0, size=m)
    c = rng.normal(size=n)
    return c, G, h, x0


class TestRoundTrip:
    def test_builder_matches_hand_normalised(self):
        rng = np.random.default_rng(7)
        for trial in range(25):
            n = rng.integers(2, 6)
            m = rng.integers(2, 8)
            c, G, h, _ = random_lp_spec(rng, n, m)
            lo = -10.0 * np.ones(n)
            hi = 10.0 * np.ones(n)

            b1 = ProblemBuilder()
            x1 = b1.variable("x", n, lb=lo, ub=hi)
            b1.constrain(G @ x1.expr() <= h, "g")
            b1.cost_linear(dot(c, x1))
            p1 = substitute_parameters(b1.lower(), {})

            # hand-normalised equivalent: bounds appended as rows directly
            b2 = ProblemBuilder()
            x2 = b2.variable("x", n)
            Gall = np.vstack([G, np.eye(n), -np.eye(n)])
            hall = np.concatenate([h, hi, -lo])
            b2.constrain(Gall @ x2.expr() <= hall, "all")
            b2.cost_linear(dot(c, x2))
            p2 = substitute_parameters(b2.lower(), {})

            s1 = solve(p1, SolverOptions())
            s2 = solve(p2, SolverOptions())
            assert s1.status == s2.status
            if s1.status == "optimal":
                assert abs(s1.objective - s2.objective) <= 1e-6

    def test_quadratic_round_trip_objective(self):
        b = ProblemBuilder()
        x = b.variable("x", 2)
        b.cost_quadratic(x, x, np.diag([0.5, 1.0]))
        b.cost_linear(dot([1.0, -1.0], x))
        prob = b.lower()
        z = np.array([2.0, 3.0])
        # x'Mx with M=diag(.5,1) -> .5*4 + 1*9 = 11; linear 2-3 = -1
        assert prob.objective_value(z) == pytest.approx(11.0 - 1.0)

    def test_name_map_totality(self):
        prob = two_var_lp()
        assert validate(prob) == []
        cov = np.zeros(prob.n_ineq)
        for name, (blk, a0, a1) in prob.row_names.items():
            if blk == "ineq":
                cov[a0:a1] += 1
        assert np.all(cov == 1)


class TestTextSpec:
    DOC = {
        "variables": [{"name": "x", "shape": 2, "lb": 0.0}],
        "parameters": [{"name": "y", "dim": 1}],
        "objective": {"linear": [{"var": "x", "coeffs": [1.0, 1.0]}]},
        "constraints": [
            {"name": "cover", "sense": ">=",
             "terms": [{"var": "x", "matrix": [[1.0, 1.0]]},
                       {"param": "y", "matrix": [[-1.0]]}],
             "rhs": [0.0]},
        ],
    }

    def test_document_matches_programmatic(self):
        p_doc = build_problem(self.DOC)
        p_api = two_var_lp()
        c_doc = substitute_parameters(p_doc, {"y": [2.0]})
        c_api = substitute_parameters(p_api, {"y": [2.0]})
        s1 = solve(c_doc, SolverOptions())
        s2 = solve(c_api, SolverOptions())
        assert s1.objective == pytest.approx(s2.objective, abs=1e-9)

    def test_dump_load_round_trip(self, tmp_path):
        prob = two_var_lp()
        path = tmp_path / "prob.json"
        dump_document(prob, path)
        again = load_document(path)
        np.testing.assert_array_equal(prob.G.toarray(), again.G.toarray())
        np.testing.assert_array_equal(prob.h, again.h)
        np.testing.assert_array_equal(prob.q, again.q)
        slot, _ = prob.param_names["y"]
        slot2, _ = again.param_names["y"]
        np.testing.assert_array_equal(
            prob.Hp[slot].toarray(), again.Hp[slot2].toarray())

    def test_json_file_io(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text(json.dumps(self.DOC))
        prob = load_document(path)
        assert prob.n_z == 2


class TestBuilderFromProblem:
    def test_reconstruction_is_exact(self):
        b = ProblemBuilder()
        u = b.variable("u", 2, binary=True)
        x = b.variable("x", 3, lb=0.0)
        y = b.parameter("y", 2)
        b.constrain(np.ones((1, 3)) @ x.expr() + np.ones((1, 2)) @ u.expr()
                    >= np.ones((1, 2)) @ y.expr(), "c0")
        b.cost_linear(dot([1, 2, 3], x) + dot([5, 5], u))
        b.cost_parametric(y, x, np.ones((3, 2)))
        prob = b.lower()

        bld, vars_, params_ = builder_from_problem(prob)
        again = bld.lower()
        np.testing.assert_array_equal(prob.G.toarray(), again.G.toarray())
        np.testing.assert_array_equal(prob.A.toarray(), again.A.toarray())
        np.testing.assert_array_equal(prob.q, again.q)
        np.testing.assert_array_equal(prob.h, again.h)
        assert prob.n_I == again.n_I
        assert prob.var_names == again.var_names
        for s in range(len(prob.Qp)):
            np.testing.assert_array_equal(
                prob.Qp[s].toarray(), again.Qp[s].toarray())

    def test_extension_keeps_binaries_leading(self):
        prob = two_var_lp()
        bld, vars_, params_ = builder_from_problem(prob)
        w = bld.variable("w", 2, binary=True)
        bld.constrain(vars_["x"].expr() <= 3.0 * np.ones((2, 2)) @ w.expr(), "link")
        again = bld.lower()
        assert again.n_I == 2
        assert again.var_names["w"] == (0, 2)
