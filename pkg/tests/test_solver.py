import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmflow.asymptotics import landau_comparison
from pmflow.families import random_field
from pmflow.forces import BandLimited, DiracAtOrigin, ZeroForce
from pmflow.grid import FourierVectorField, build_grid
from pmflow.norms import full_band, pm_norm_array
from pmflow.operators import TimeGrid, duhamel_series, force_series, nonlinear_symbol, stationary_bilinear
from pmflow.solver import ContractionError, picard_fixed_point, solve_cauchy, solve_stationary

SETTINGS = settings(max_examples=20, deadline=None)


def scalar_oracle(y, eta):
    # smaller root of eta x^2 - x + y = 0
    return (1 - math.sqrt(1 - 4 * eta * y)) / (2 * eta)


class TestPicard:
    def test_scalar_example(self):
        x, cert = picard_fixed_point(0.1, None, lambda a, b: a * b, abs, tol=1e-14)
        assert x == pytest.approx((1 - math.sqrt(0.6)) / 2, abs=1e-10)
        assert x == pytest.approx(0.112702, abs=1e-6)
        assert cert.converged and cert.smallness_ok

    @SETTINGS
    @given(y=st.floats(0.001, 0.2), eta=st.floats(0.1, 1.2))
    def test_scalar_oracle(self, y, eta):
        x, cert = picard_fixed_point(y, None, lambda a, b: eta * a * b, abs, tol=1e-14, max_iter=400)
        assert x == pytest.approx(scalar_oracle(y, eta), abs=1e-10)
        # certified contraction: the measured ratio never exceeds the bound by more than 0.05
        if cert.smallness_ok:
            assert cert.contraction_ratio <= cert.ratio_bound + 0.05
        assert abs(x) <= cert.solution_bound

    def test_trivial_maps(self):
        y = np.array([1.0, -2.0, 3.0])
        x, cert = picard_fixed_point(y, lambda v: 0 * v, lambda a, b: 0 * a, lambda v: float(np.abs(v).max()))
        assert np.array_equal(x, y) and cert.iteration_residuals == [0.0]

    def test_linear_part(self):
        # x = y + lam x has x = y / (1 - lam)
        x, cert = picard_fixed_point(1.0, lambda v: 0.5 * v, lambda a, b: 0.0, abs, tol=1e-14, lam=0.5)
        assert x == pytest.approx(2.0, abs=1e-13)
        assert cert.uniqueness_radius == math.inf and cert.solution_bound == 4.0

    def test_large_data_flagged(self):
        with pytest.raises(ContractionError) as exc:
            picard_fixed_point(1.0, None, lambda a, b: a * b, abs, eta=1.0)
        assert exc.value.certificate is not None and not exc.value.certificate.smallness_ok

    def test_max_iter(self):
        with pytest.raises(ContractionError, match="max_iter"):
            picard_fixed_point(0.2, None, lambda a, b: a * b, abs, tol=1e-30, max_iter=3)

    def test_non_finite_data(self):
        with pytest.raises(ContractionError):
            picard_fixed_point(math.inf, None, lambda a, b: a * b, abs)

    def test_certificate_json(self):
        _, cert = picard_fixed_point(0.1, None, lambda a, b: a * b, abs)
        d = cert.to_json()
        assert d["lambda"] == 0.0 and d["smallness_ok"] and d["ratio_bound"] == pytest.approx(0.4)
        assert d["uniqueness_radius"] == pytest.approx(0.5)


class TestCauchy:
    grid = build_grid(16, 8.0)
    tg = TimeGrid.geometric(0.01, 1.0, 2**0.5)

    def test_zero(self):
        sol = solve_cauchy(None, None, self.grid, self.tg)
        assert not np.any(sol.field.values)
        assert sol.certificate.iteration_residuals == [0.0]

    def test_dirac_first_iterate_is_force(self):
        f = DiracAtOrigin([0.5, 0.0, 0.0])
        sol = solve_cauchy(None, f, self.grid, self.tg, tol=1e-12)
        F = list(force_series(f, self.grid, self.tg.nodes))
        assert all(np.array_equal(sol.linear[i], F[i]) for i in range(len(F)))
        # the first residual is ||B(F, F)||, so the iteration started from x0 = F
        band = full_band(self.grid)
        series = duhamel_series(self.grid, self.tg.nodes,
                                lambda m: nonlinear_symbol(FourierVectorField(self.grid, F[m]),
                                                           FourierVectorField(self.grid, F[m])))
        first = max(pm_norm_array(self.grid, b, 2.0, band) for b in series)
        assert sol.certificate.iteration_residuals[0] == pytest.approx(first, rel=1e-12)

    def test_bilinear_part_linear_in_time_near_zero(self):
        # ||u - S u0 - F||_PM0 <= C t: the ratio cannot grow as t -> 0
        g = build_grid(32, 16.0)
        sol = solve_cauchy(None, DiracAtOrigin([0.5, 0.0, 0.0]), g, self.tg, tol=1e-12)
        band = full_band(g)
        ratio = np.array([pm_norm_array(g, sol.bilinear_part(i), 0.0, band) / t
                          for i, t in enumerate(sol.field.times)])
        assert np.all(np.isfinite(ratio)) and np.all(np.diff(ratio) >= 0)

    def test_invariants(self):
        u0 = FourierVectorField(self.grid, 0.02 * random_field(self.grid, 11).amplitudes)
        sol = solve_cauchy(u0, DiracAtOrigin([0.2, 0.1, 0.0]), self.grid, self.tg, tol=1e-12)
        cert = sol.certificate
        assert cert.converged and cert.smallness_ok
        assert cert.a_posteriori_residual <= 10 * 1e-12
        assert cert.contraction_ratio <= cert.ratio_bound + 0.05
        band = full_band(self.grid)
        assert max(pm_norm_array(self.grid, v, 2.0, band) for v in sol.field.values) <= cert.solution_bound
        assert max(FourierVectorField(self.grid, v).divergence_defect() for v in sol.field.values) <= 1e-10

    def test_datum_projected(self):
        amp = 1j * self.grid.xi * np.exp(-self.grid.xi_sq)[None]
        sol = solve_cauchy(FourierVectorField(self.grid, amp), None, self.grid, self.tg)
        assert not np.any(np.abs(sol.datum.amplitudes) > 1e-15)

    def test_large_data_rejected(self):
        with pytest.raises(ContractionError):
            solve_cauchy(None, DiracAtOrigin([400.0, 0.0, 0.0]), self.grid, self.tg, max_iter=20)


class TestSelfSimilar:
    def test_scaling_law(self, self_similar):
        # u_hat(xi, 4t) = 4 u_hat(2 xi, t) across the decade 0.04 <= t <= 0.64
        assert max(s.defect for s in self_similar.similarity) <= 0.01

    @pytest.mark.xfail(strict=True, reason="the t^(1/2) prefactor does not follow from u(x,t) = t^-1/2 u(x/t^1/2, 1)")
    def test_scaling_law_half_power_prefactor(self, self_similar):
        assert max(s.defect_half_power for s in self_similar.similarity) <= 0.01

    def test_certificate(self, self_similar):
        cert = self_similar.certificate
        assert cert.converged and cert.smallness_ok
        assert cert.a_posteriori_residual <= 10 * self_similar.tol
        assert cert.contraction_ratio <= cert.ratio_bound + 0.05
        assert self_similar.xa2 <= cert.solution_bound

    def test_divergence_free(self, self_similar):
        assert self_similar.divergence <= 1e-10


class TestStationary:
    grid = build_grid(16, 8.0)

    def test_zero(self):
        sol = solve_stationary(ZeroForce(), self.grid)
        assert not np.any(sol.field.amplitudes) and sol.constant == 0.0

    def test_band_limited(self):
        g = self.grid
        sol = solve_stationary(BandLimited(g, 0.05 * random_field(g, 5).amplitudes), g, tol=1e-13)
        cert = sol.certificate
        assert cert.converged and cert.a_posteriori_residual <= 1e-12
        assert sol.field.divergence_defect() <= 1e-10
        # w = -B_E(w, w) + G directly
        w = sol.field
        resid = sol.lift.amplitudes - stationary_bilinear(w, w).amplitudes - w.amplitudes
        assert pm_norm_array(g, resid, 2.0, full_band(g)) <= 1e-12

    def test_constant_recorded(self):
        g = self.grid
        f = DiracAtOrigin([0.3, 0.0, 0.0])
        sol = solve_stationary(f, g)
        band = full_band(g)
        w2 = pm_norm_array(g, sol.field.amplitudes, 2.0, band)
        assert w2 == pytest.approx(sol.constant * pm_norm_array(g, f.symbol(g), 0.0, band), rel=1e-12)
        assert w2 <= sol.certificate.solution_bound
        assert sol.certificate.contraction_ratio <= sol.certificate.ratio_bound + 0.05

    def test_large_force_rejected(self):
        with pytest.raises(ContractionError):
            solve_stationary(DiracAtOrigin([500.0, 0.0, 0.0]), self.grid, max_iter=30)

    def test_matches_landau(self):
        # band-limited comparison with the whole-space closed form on the annulus [0.5, 2]
        coarse = landau_comparison(build_grid(32, 16.0), 0.5)
        fine = landau_comparison(build_grid(64, 16.0), 0.5)
        assert fine.relative_l2 <= 0.05 and fine.relative_l2 < coarse.relative_l2
