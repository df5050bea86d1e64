import math

import numpy as np
import pytest
from scipy import optimize

from csregions.errors import DomainError
from csregions.prior import mutual_information, scalar_mmse
from csregions.tanaka import (
    Branch,
    ChannelSpec,
    FixedPoint,
    count_fixed_points,
    db_to_linear,
    find_fixed_points,
    free_energy,
    free_energy_asymptotic,
    mmse_surface,
    solve,
    tanaka_residual,
)
import csregions.tanaka as tanaka_mod

from oracles import band_edges, count_roots


def spec(gamma_db, rate, p=0.1):
    return ChannelSpec.from_db(p, gamma_db, rate)


class TestChannelSpec:
    @pytest.mark.parametrize("args", [(0.0, 10.0, 0.2), (0.1, 0.0, 0.2), (0.1, 10.0, 1.0), (0.1, math.inf, 0.2)])
    def test_rejects_bad_values(self, args):
        with pytest.raises(DomainError):
            ChannelSpec(*args)

    def test_db_round_trip(self):
        np.testing.assert_allclose(spec(60, 0.2).gamma, 1e6)
        np.testing.assert_allclose(spec(60, 0.2).gamma_db, 60.0)


class TestResidual:
    def test_gaussian_unique_root(self):
        # p = 1: eta = 1 / (1 + gamma / (1 + eta gamma R)) solved in closed form
        s = ChannelSpec(1.0, 10.0, 0.5)
        g, r = s.gamma, s.rate
        a, b, c = g * r, 1 + g - g * r, -1.0
        eta = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
        assert abs(tanaka_residual(s, eta)) < 1e-12
        (fp,) = find_fixed_points(s)
        np.testing.assert_allclose(fp.eta, eta, rtol=1e-10)

    def test_near_zero_eta(self):
        np.testing.assert_allclose(tanaka_residual(spec(60, 0.2), 1e-12), 1.0, atol=1e-5)

    def test_near_large_root(self):
        s = ChannelSpec(0.1, 1e6, 0.2)
        assert abs(tanaka_residual(s, 0.5)) < 0.05

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.5, math.nan])
    def test_rejects_eta(self, eta):
        with pytest.raises(DomainError):
            tanaka_residual(spec(60, 0.2), eta)


class TestFixedPoints:
    @pytest.mark.parametrize(
        "gamma_db,rate,count",
        [(30, 0.18, 1), (60, 0.25, 1), (60, 0.18, 3), (60, 0.13, 3), (50, 0.12, 1), (70, 0.2, 3)],
    )
    def test_counts(self, gamma_db, rate, count):
        assert count_roots(0.1, db_to_linear(gamma_db), rate) == count
        assert len(find_fixed_points(spec(gamma_db, rate))) == count
        assert count_fixed_points(spec(gamma_db, rate)) == count

    def test_counts_match_parametrization(self):
        rates = np.linspace(0.105, 0.45, 12)
        for gamma_db in (25, 38, 45, 55, 65, 75):
            gamma = db_to_linear(gamma_db)
            edges = band_edges(0.1, gamma)
            for r in rates:
                if edges and min(abs(r - edges[0]), abs(r - edges[1])) < 1e-4:
                    continue
                assert count_fixed_points(ChannelSpec(0.1, gamma, r)) == count_roots(0.1, gamma, r), (gamma_db, r)

    def test_residual_vanishes_at_roots(self):
        for s in (spec(60, 0.18), spec(45, 0.19), spec(30, 0.3), spec(80, 0.15)):
            for fp in find_fixed_points(s):
                # re-evaluate with the adaptive integrator, not the solver's kernel
                resid = 1 - fp.eta - fp.eta * s.gamma * scalar_mmse(s.p, fp.eta * s.gamma * s.rate)
                assert abs(resid) < 1e-8 * (1 + s.gamma * fp.mmse)
                assert 0 < fp.eta <= 1

    def test_branch_labels_ordered(self):
        fps = find_fixed_points(spec(60, 0.18))
        assert [fp.branch for fp in fps] == [Branch.SMALLEST, Branch.MIDDLE, Branch.LARGEST]
        assert fps[0].eta < fps[1].eta < fps[2].eta
        assert fps[0].mmse > fps[1].mmse > fps[2].mmse
        np.testing.assert_allclose([fp.a for fp in fps], [fp.eta * 1e6 for fp in fps])

    def test_large_root_near_low_noise_value(self):
        # eta_3 -> 1 - p/R as gamma grows
        assert abs(find_fixed_points(spec(60, 0.18))[-1].eta - (1 - 0.1 / 0.18)) < 0.05

    def test_count_always_one_to_three(self):
        for p in (0.05, 0.1, 0.2):
            for r in np.linspace(p + 0.01, 0.6, 8):
                for gamma in np.logspace(0, 7, 8):
                    n = count_fixed_points(ChannelSpec(p, float(gamma), float(r)))
                    assert n in (1, 2, 3)

    @pytest.mark.parametrize("rate", [0.15, 0.4, 0.9])
    @pytest.mark.parametrize("gamma", [1.0, 1e3, 1e8])
    def test_gaussian_signal_single_root(self, rate, gamma):
        assert count_fixed_points(ChannelSpec(1.0, gamma, rate)) == 1

    def test_tangency_is_flagged(self):
        # R exactly at the local maximum of R(s) makes the two small roots merge
        p, gamma = 0.1, 1e6
        top = optimize.minimize_scalar(
            lambda ls: -(math.exp(ls) / gamma + math.exp(ls) * scalar_mmse(p, math.exp(ls))),
            bounds=(0.0, math.log(100.0)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        fps = find_fixed_points(ChannelSpec(p, gamma, -top.fun))
        assert len(fps) in (2, 3)
        if len(fps) == 2:
            assert fps[0].degenerate and not fps[1].degenerate
            assert solve(ChannelSpec(p, gamma, -top.fun)).selected.branch is Branch.LARGEST


class TestFreeEnergy:
    def test_gaussian_value(self):
        # p = 1, eta = 1: E = I = (1/2) ln(1 + gamma R)
        np.testing.assert_allclose(free_energy(ChannelSpec(1.0, 1.0, 0.5), 1.0), 0.5 * math.log(1.5), rtol=1e-10)

    def test_ordering_at_high_snr(self):
        e1, e2, e3 = (fp.free_energy for fp in find_fixed_points(ChannelSpec(0.1, 1e8, 0.2)))
        assert e3 < e1 < e2

    def test_stationary_at_roots(self):
        s = spec(60, 0.18)
        for fp in find_fixed_points(s):
            h = 1e-6 * fp.eta
            d = (free_energy(s, fp.eta + h) - free_energy(s, fp.eta - h)) / (2 * h)
            # scale by the size of the terms that cancel
            assert abs(d) < 1e-5 * s.rate / fp.eta

    def test_middle_root_is_energy_maximum(self):
        s = spec(60, 0.18)
        mid = find_fixed_points(s)[1]
        e = free_energy(s, mid.eta)
        assert e > free_energy(s, mid.eta * 0.95) and e > free_energy(s, mid.eta * 1.05)

    def test_fast_energy_matches_adaptive(self):
        s = spec(60, 0.18)
        for fp in find_fixed_points(s):
            np.testing.assert_allclose(fp.free_energy, free_energy(s, fp.eta), rtol=1e-10)

    def test_mixed_base_penalty(self):
        s = spec(60, 0.18)
        eta = 0.3
        info = mutual_information(0.1, eta * s.gamma * s.rate)
        want = info + 0.5 * s.rate * (eta - 1 - math.log2(eta))
        np.testing.assert_allclose(free_energy(s, eta, "mixed"), want, rtol=1e-12)

    def test_unknown_base(self):
        with pytest.raises(DomainError):
            free_energy(spec(60, 0.18), 0.5, "bits")


class TestAsymptotic:
    def test_gamma_slopes_match_exact(self):
        # E3 grows like (p/2) ln gamma; the small branches like (R/2) ln gamma
        lo, hi = ChannelSpec(0.1, 1e10, 0.2), ChannelSpec(0.1, 1e12, 0.2)
        fl, fh = find_fixed_points(lo), find_fixed_points(hi)
        for a, b, slope in zip(fl, fh, (0.2, 0.2, 0.1)):
            exact = b.free_energy - a.free_energy
            approx = free_energy_asymptotic(hi, b) - free_energy_asymptotic(lo, a)
            np.testing.assert_allclose(exact, 0.5 * slope * math.log(100), rtol=2e-3)
            np.testing.assert_allclose(approx, exact, rtol=2e-3)

    def test_largest_branch_lowest(self):
        s = ChannelSpec(0.1, 1e8, 0.2)
        e1, e2, e3 = (free_energy_asymptotic(s, fp) for fp in find_fixed_points(s))
        assert e3 < e1 and e3 < e2

    def test_asymptotic_small_branch_order(self):
        # the two small roots differ only through a; the larger a gets the
        # lower asymptotic energy because its log coefficient (p - R)/2 < 0
        s = ChannelSpec(0.1, 1e8, 0.2)
        f1, f2, _ = find_fixed_points(s)
        assert f2.a > f1.a
        assert free_energy_asymptotic(s, f2) < free_energy_asymptotic(s, f1)

    def test_unique_root_branch_choice(self):
        s = ChannelSpec(0.1, 1e8, 0.3)
        (fp,) = find_fixed_points(s)
        as_largest = FixedPoint(fp.eta, fp.a, fp.mmse, fp.free_energy, Branch.LARGEST)
        np.testing.assert_allclose(free_energy_asymptotic(s, fp), free_energy_asymptotic(s, as_largest))


class TestSolve:
    def test_above_band_unique(self):
        sol = solve(spec(60, 0.22))
        assert len(sol.fixed_points) == 1 and sol.selected.mmse < 1e-5

    def test_low_noise_law(self):
        sol = solve(ChannelSpec(0.1, 1e8, 0.2))
        assert sol.selected.branch is Branch.LARGEST
        np.testing.assert_allclose(sol.selected.eta, 0.5, rtol=0.02)
        np.testing.assert_allclose(sol.selected.mmse * 1e8 * 0.1 / 0.1, 1.0, rtol=0.05)

    @pytest.mark.parametrize("rate", [0.2, 0.3, 0.5])
    def test_noise_sensitivity_limit(self, rate):
        sol = solve(ChannelSpec(0.1, 1e8, rate))
        np.testing.assert_allclose(sol.selected.mmse * 1e8, 0.1 / (rate - 0.1), rtol=0.05)

    def test_selected_has_lowest_energy(self):
        for s in (spec(60, 0.18), spec(60, 0.14), spec(50, 0.16), spec(70, 0.13)):
            sol = solve(s)
            energies = [free_energy(s, fp.eta) for fp in sol.fixed_points]
            assert free_energy(s, sol.selected.eta) == min(energies)

    def test_mmse_nonincreasing_in_gamma(self):
        gammas = np.logspace(0, 8, 40)
        for rate in (0.12, 0.15, 0.18, 0.25):
            vals = [solve(ChannelSpec(0.1, float(g), rate)).selected.mmse for g in gammas]
            assert np.all(np.diff(vals) <= 1e-12 * np.asarray(vals[:-1])), rate

    def test_tie_goes_to_larger_eta(self, monkeypatch):
        fps = [
            FixedPoint(0.01, 1.0, 0.05, 1.0, Branch.SMALLEST),
            FixedPoint(0.1, 10.0, 0.04, 1.2, Branch.MIDDLE),
            FixedPoint(0.4, 40.0, 1e-5, 1.0 + 1e-12, Branch.LARGEST),
        ]
        monkeypatch.setattr(tanaka_mod, "find_fixed_points", lambda spec, base="nats": fps)
        sol = tanaka_mod.solve(spec(60, 0.18))
        assert sol.selected is fps[2] and sol.degenerate

    def test_mixed_base_never_picks_small_branch_at_high_snr(self):
        assert solve(spec(60, 0.14), "mixed").selected.branch is Branch.LARGEST
        assert solve(spec(60, 0.14), "nats").selected.branch is Branch.SMALLEST


class TestSurface:
    def test_gaussian_surface(self):
        rates, gammas = [0.2, 0.5], [1.0, 100.0, 1e4]
        rows = mmse_surface(1.0, rates, gammas)
        assert [(r.rate, r.gamma) for r in rows] == [(a, b) for a in rates for b in gammas]
        for row in rows:
            np.testing.assert_allclose(row.mmse, 1.0 / (1.0 + row.eta * row.gamma * row.rate), rtol=1e-10)
            assert row.fixed_point_count == 1

    def test_low_snr_limit(self):
        (row,) = mmse_surface(0.1, [0.3], [1e-6])
        np.testing.assert_allclose(row.mmse, 0.1, rtol=1e-5)

    def test_workers_do_not_change_output(self):
        args = (0.1, [0.15, 0.2], [1e3, 1e6])
        assert mmse_surface(*args) == mmse_surface(*args, workers=2)

    def test_empty_grid(self):
        with pytest.raises(DomainError):
            mmse_surface(0.1, [], [1.0])
