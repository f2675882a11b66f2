import numpy as np
import pytest

from gridlearn.grid import (
    DisconnectedNetwork,
    NoOnlineGenerator,
    Profile,
    SchemaError,
    build_dispatch,
    build_redispatch,
    build_uc,
    bundled_case,
    generate_profiles,
    gscr,
    gscr_gradient,
    load_case,
    load_profile,
    ptdf,
    reduce_admittance,
    save_case,
    save_profile,
    uc_parameter_values,
)
from gridlearn.optmodel import substitute_parameters, validate
from gridlearn.solver import SolverOptions, solve


def two_bus_case(b_pu=5.0):
    return load_case({
        "name": "toy2", "base_mva": 100.0,
        "buses": [{"id": 1, "type": "slack", "load_share": 0.0},
                  {"id": 2, "type": "pq", "load_share": 1.0}],
        "lines": [{"from": 1, "to": 2, "reactance": 1.0 / b_pu, "limit_mw": 100}],
        "generators": [{"bus": 1, "p_min": 5, "p_max": 100, "cost_energy": 10}],
        "renewables": [{"bus": 2, "capacity_mw": 50.0}],
    })


class TestCaseIO:
    def test_bundled_14_bus_counts(self):
        g = bundled_case("case14")
        assert g.n_gen == 5
        assert g.n_line == 20
        assert g.n_ren == 4
        assert g.n_load == 11
        assert sorted(g.bus_ids[g.ren_bus].tolist()) == [5, 11, 13, 14]

    def test_two_bus_valid(self):
        g = two_bus_case()
        assert g.n_bus == 2 and g.n_line == 1

    def test_islanded_bus_rejected(self):
        with pytest.raises(DisconnectedNetwork):
            load_case({
                "buses": [{"id": 1, "type": "slack"}, {"id": 2}, {"id": 3}],
                "lines": [{"from": 1, "to": 2, "reactance": 0.1}],
                "generators": [{"bus": 1, "p_min": 0, "p_max": 10,
                                "cost_energy": 1}],
            })

    def test_schema_errors(self):
        with pytest.raises(SchemaError):
            load_case({"buses": [], "lines": [], "generators": []})

    def test_save_load_round_trip(self, tmp_path):
        g = bundled_case("case14")
        path = tmp_path / "case.json"
        save_case(g, path)
        again = load_case(str(path))
        np.testing.assert_allclose(g.reactance, again.reactance)
        np.testing.assert_allclose(g.p_max, again.p_max)
        np.testing.assert_allclose(g.load_share, again.load_share)


class TestPtdf:
    def test_two_bus_row(self):
        g = two_bus_case()
        F = ptdf(g)
        np.testing.assert_allclose(F[0], [0.0, -1.0], atol=1e-12)

    def test_kcl_on_triangle(self):
        g = load_case({
            "buses": [{"id": 1, "type": "slack", "load_share": 0.4},
                      {"id": 2, "load_share": 0.3}, {"id": 3, "load_share": 0.3}],
            "lines": [{"from": 1, "to": 2, "reactance": 0.1},
                      {"from": 2, "to": 3, "reactance": 0.2},
                      {"from": 1, "to": 3, "reactance": 0.25}],
            "generators": [{"bus": 1, "p_min": 0, "p_max": 10, "cost_energy": 1}],
        })
        F = ptdf(g)
        rng = np.random.default_rng(0)
        inj = rng.normal(size=3)
        inj -= inj.mean()
        flows = F @ inj
        C = g.line_incidence()
        residual = C.T @ flows - inj
        assert np.max(np.abs(residual)) < 1e-9

    def test_translation_invariance(self):
        g = bundled_case("case14")
        F = ptdf(g)
        rng = np.random.default_rng(1)
        inj = rng.normal(size=g.n_bus)
        shift = 3.7 * np.ones(g.n_bus)
        np.testing.assert_allclose(F @ inj, F @ (inj + shift) - F @ shift,
                                   atol=1e-9)
        # uniform injection produces no flow change relative to baseline
        np.testing.assert_allclose(F @ shift, F @ (2 * shift) - F @ shift,
                                   atol=1e-9)


class TestKron:
    def test_two_bus_hand_reduction(self):
        g = two_bus_case(b_pu=5.0)
        Y, kept = reduce_admittance(g, [True])
        assert kept.tolist() == [0]
        np.testing.assert_allclose(Y, [[5.0]], atol=1e-12)

    def test_series_circuit_identity(self):
        # inserting a passive bus mid-line halves the series reactance
        direct = load_case({
            "buses": [{"id": 1, "type": "slack"}, {"id": 2, "load_share": 1.0}],
            "lines": [{"from": 1, "to": 2, "reactance": 0.4}],
            "generators": [{"bus": 1, "p_min": 0, "p_max": 10, "cost_energy": 1}],
            "renewables": [{"bus": 2, "capacity_mw": 10}],
        })
        with_mid = load_case({
            "buses": [{"id": 1, "type": "slack"}, {"id": 3},
                      {"id": 2, "load_share": 1.0}],
            "lines": [{"from": 1, "to": 3, "reactance": 0.2},
                      {"from": 3, "to": 2, "reactance": 0.2}],
            "generators": [{"bus": 1, "p_min": 0, "p_max": 10, "cost_energy": 1}],
            "renewables": [{"bus": 2, "capacity_mw": 10}],
        })
        Y1, _ = reduce_admittance(direct, [True])
        Y2, _ = reduce_admittance(with_mid, [True])
        np.testing.assert_allclose(Y1, Y2, atol=1e-9)

    def test_elimination_order_invariance(self):
        g = bundled_case("case14")
        online = np.array([True, True, False, False, True])
        Y1, k1 = reduce_admittance(g, online)
        # permute renewables by reloading with reversed renewable table
        import json
        from importlib import resources

        doc = json.loads(resources.files("gridlearn.grid")
                         .joinpath("data/case14.json").read_text())
        doc["renewables"] = doc["renewables"][::-1]
        g2 = load_case(doc)
        Y2, k2 = reduce_admittance(g2, online)
        np.testing.assert_allclose(Y1, Y2[::-1, ::-1], atol=1e-9)

    def test_no_online_generator(self):
        g = two_bus_case()
        with pytest.raises(NoOnlineGenerator):
            reduce_admittance(g, [False])


class TestGscr:
    def test_scalar_value(self):
        g = two_bus_case(b_pu=5.0)
        val = gscr(g, [True], np.array([0.5]))
        assert val == pytest.approx(10.0, abs=1e-9)

    def test_scalar_homogeneity(self):
        g = two_bus_case(b_pu=5.0)
        v1 = gscr(g, [True], np.array([0.25]))
        v2 = gscr(g, [True], np.array([0.5]))
        assert v1 == pytest.approx(2 * v2, rel=1e-12)

    def test_empty_ibr_set_is_inf(self):
        g = two_bus_case()
        assert gscr(g, [True], np.array([0.0])) == np.inf

    def test_matches_brute_force_eigensolver(self):
        g = bundled_case("case14")
        rng = np.random.default_rng(2)
        for _ in range(10):
            online = rng.integers(0, 2, size=5).astype(bool)
            if not online.any():
                online[0] = True
            p = rng.uniform(0.05, 0.6, size=4)
            val = gscr(g, online, p)
            Y, kept = reduce_admittance(g, online)
            M = np.diag(1.0 / p[kept]) @ Y
            roots = np.sort(np.real(np.linalg.eigvals(M)))
            assert val == pytest.approx(roots[0], abs=1e-8)

    def test_scalar_gradient(self):
        g = two_bus_case(b_pu=5.0)
        grad = gscr_gradient(g, [True], np.array([0.5]))
        assert grad[0] == pytest.approx(-20.0, abs=1e-9)

    def test_gradient_matches_fd(self):
        g = bundled_case("case14")
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(10):
            online = np.array([True, rng.random() < 0.5, rng.random() < 0.5,
                               True, rng.random() < 0.5])
            p = rng.uniform(0.05, 0.6, size=4)
            grad = gscr_gradient(g, online, p)
            for i in range(4):
                hi = p.copy(); hi[i] += h
                lo = p.copy(); lo[i] -= h
                fd = (gscr(g, online, hi) - gscr(g, online, lo)) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_symmetric_case_equal_gradients(self):
        g = load_case({
            "buses": [{"id": 1, "type": "slack"},
                      {"id": 2, "load_share": 0.5}, {"id": 3, "load_share": 0.5}],
            "lines": [{"from": 1, "to": 2, "reactance": 0.2},
                      {"from": 1, "to": 3, "reactance": 0.2}],
            "generators": [{"bus": 1, "p_min": 0, "p_max": 10, "cost_energy": 1}],
            "renewables": [{"bus": 2, "capacity_mw": 10},
                           {"bus": 3, "capacity_mw": 10}],
        })
        # fully symmetric system: smallest eigenvalue is repeated, gradient
        # falls back to finite differences with a warning
        from gridlearn.grid import DegenerateEigenvalue

        with pytest.warns(DegenerateEigenvalue):
            grad = gscr_gradient(g, [True], np.array([0.3, 0.3]))
        assert grad[0] == pytest.approx(grad[1], rel=1e-6)


class TestProfiles:
    def test_night_is_dark_and_deterministic(self):
        g = bundled_case("case14")
        p1 = generate_profiles(g, seed=7, days=3)
        p2 = generate_profiles(g, seed=7, days=3)
        assert np.all(p1.solar[0] == 0.0)           # hour 0
        np.testing.assert_array_equal(p1.solar, p2.solar)
        np.testing.assert_array_equal(p1.load, p2.load)

    def test_full_year_rows(self):
        g = bundled_case("case14")
        p = generate_profiles(g, seed=1, days=365)
        assert p.horizon == 8760

    def test_bounds(self):
        g = bundled_case("case14")
        p = generate_profiles(g, seed=2, days=30)
        assert np.all(p.solar >= 0)
        assert np.all(p.solar <= g.ren_capacity[None, :] + 1e-9)
        assert np.all(p.load >= 0)
        assert p.load.sum(axis=1).max() <= 0.8 * g.p_max.sum() + 1e-6

    def test_file_round_trip_bit_exact(self, tmp_path):
        g = bundled_case("case14")
        p = generate_profiles(g, seed=3, days=2)
        path = tmp_path / "profile.csv"
        save_profile(p, path)
        again = load_profile(path)
        np.testing.assert_array_equal(p.load, again.load)
        np.testing.assert_array_equal(p.solar, again.solar)
        np.testing.assert_array_equal(p.features, again.features)
        assert p.feature_names == again.feature_names


class TestBuilders:
    def test_uc_census(self):
        g = bundled_case("case14")
        prob = build_uc(g, horizon=24)
        assert prob.n_z == 1325
        assert prob.n_I == 360
        assert validate(prob) == []
        census = prob.census()
        # structural rows plus binary upper bounds (the lower bounds are the
        # relaxation box; see census() docs)
        n_bin_lb = 360
        assert prob.n_eq + prob.n_ineq - n_bin_lb == 2938

    def test_uc_single_gen_surplus_and_shortage(self):
        g = two_bus_case()   # one gen (p_min 5, p_max 100), c_ls=1000, c_rc=50
        prob = build_uc(g, horizon=1, initial_status=[1.0],
                        initial_output=[5.0])
        # load below p_min: unit held at p_min, surplus dumped as curtailment
        conc = substitute_parameters(prob, uc_parameter_values([[2.0]], [[0.0]]))
        sol = solve(conc, SolverOptions(abs_gap=0.0, rel_gap=0.0))
        assert sol.status == "optimal"
        assert sol.value_of(conc, "pg")[0] == pytest.approx(5.0, abs=1e-7)
        assert sol.value_of(conc, "curtail")[0] == pytest.approx(3.0, abs=1e-7)
        # load above p_max: shedding activates at the shedding penalty
        conc2 = substitute_parameters(prob, uc_parameter_values([[120.0]], [[0.0]]))
        sol2 = solve(conc2, SolverOptions(abs_gap=0.0, rel_gap=0.0))
        assert sol2.value_of(conc2, "shed")[0] == pytest.approx(20.0, abs=1e-7)

    def test_uc_zero_profile_commits_cheapest(self):
        g = bundled_case("case14")
        prob = build_uc(g, horizon=1, initial_status=np.zeros(5),
                        initial_output=np.zeros(5))
        conc = substitute_parameters(
            prob, uc_parameter_values(np.zeros((1, 11)), np.zeros((1, 4))))
        sol = solve(conc, SolverOptions())
        assert sol.status == "optimal"
        u = sol.value_of(conc, "status")
        assert u.sum() >= 1 - 1e-9   # all-off forbidden

    def test_dispatch_and_redispatch_chain(self):
        g = bundled_case("case14")
        status = np.array([1, 1, 0, 0, 1], dtype=float)
        prof = generate_profiles(g, seed=5, days=1)
        t = 12
        dp = build_dispatch(g, status)
        conc = substitute_parameters(dp, {"load": prof.load[t],
                                          "solar": prof.solar[t]})
        sol = solve(conc, SolverOptions())
        assert sol.status == "optimal"
        pg = sol.value_of(conc, "pg")

        rd = build_redispatch(g, status)
        # actual equals forecast: no redispatch needed
        conc2 = substitute_parameters(rd, {"load": prof.load[t],
                                           "solar": prof.solar[t],
                                           "base_dispatch": pg})
        sol2 = solve(conc2, SolverOptions())
        assert sol2.status == "optimal"
        assert abs(sol2.objective) < 1e-5
        np.testing.assert_allclose(sol2.value_of(conc2, "dpg"), 0.0, atol=1e-6)

    def test_redispatch_shortfall_uses_ramp(self):
        g = bundled_case("case14")
        status = np.ones(5)
        prof = generate_profiles(g, seed=6, days=1)
        t = 12
        dp = build_dispatch(g, status)
        conc = substitute_parameters(dp, {"load": prof.load[t],
                                          "solar": prof.solar[t]})
        sol = solve(conc, SolverOptions())
        pg = sol.value_of(conc, "pg")
        low_solar = np.maximum(prof.solar[t] - 1.0, 0.0)
        conc2 = substitute_parameters(build_redispatch(g, status),
                                      {"load": prof.load[t],
                                       "solar": low_solar,
                                       "base_dispatch": pg})
        sol2 = solve(conc2, SolverOptions())
        assert sol2.status == "optimal"
        dpg = sol2.value_of(conc2, "dpg")
        deficit = prof.solar[t].sum() - low_solar.sum()
        assert dpg.sum() == pytest.approx(deficit, abs=1e-5)

    def test_redispatch_always_feasible(self):
        g = bundled_case("case14")
        status = np.array([1, 1, 0, 0, 1], dtype=float)
        rd = build_redispatch(g, status)
        rng = np.random.default_rng(8)
        prof = generate_profiles(g, seed=8, days=2)
        for _ in range(12):
            t = int(rng.integers(0, prof.horizon))
            base = rng.uniform(g.p_min * status, g.p_max * np.maximum(status, 1e-9))
            base = base * status
            conc = substitute_parameters(rd, {
                "load": prof.load[t] * rng.uniform(0.5, 1.5),
                "solar": prof.solar[t] * rng.uniform(0.0, 1.0),
                "base_dispatch": base})
            assert solve(conc, SolverOptions()).status == "optimal"
