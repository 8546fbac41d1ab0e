import json

import numpy as np
import pytest

from progadjust.ancova import (FIT_SCORE, INSUFFICIENT, AncovaInputs,
                               binary_covariate_multiplier, expected_qk, imbalance_ratio,
                               score_vs_covariates, second_order_precision, simulate_qk)
from progadjust.rng import RngStream


class TestExpectedQk:
    @pytest.mark.parametrize("n", [6, 20, 100, 1000])
    def test_no_covariates(self, n):
        assert expected_qk(n, 0) == pytest.approx(4 / n, rel=1e-15)

    def test_values(self):
        assert expected_qk(100, 5) == pytest.approx(0.04 * 97 / 92, rel=1e-15)
        assert expected_qk(100, 1) == pytest.approx(0.04 * 97 / 96, rel=1e-15)

    def test_pole(self):
        with pytest.raises(ValueError):
            expected_qk(20, 17)

    def test_odd_n(self):
        with pytest.raises(ValueError):
            expected_qk(21, 2)

    def test_increasing(self):
        vals = [expected_qk(50, k) for k in range(0, 47)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert min(vals) >= 4 / 50

    @pytest.mark.parametrize("n,k", [(40, 2), (100, 5)])
    def test_matches_simulation(self, n, k):
        q = simulate_qk(n, k, 1000, RngStream(31).child(n, k))
        assert q.mean() == pytest.approx(expected_qk(n, k), rel=0.03)
        assert (q >= 4 / n - 1e-12).all()


class TestRatios:
    def test_baseline_one(self):
        assert imbalance_ratio(100, 5, 1) == pytest.approx(96 / 92)
        assert imbalance_ratio(100, 1, 1) == 1.0

    def test_baseline_zero(self):
        assert imbalance_ratio(100, 5, 0) == pytest.approx(97 / 92)

    def test_consistent_with_expected_qk(self):
        assert imbalance_ratio(60, 4, 1) == pytest.approx(expected_qk(60, 4) / expected_qk(60, 1))

    def test_bad_baseline(self):
        with pytest.raises(ValueError):
            imbalance_ratio(100, 5, 2)


class TestSecondOrder:
    def test_values(self):
        assert second_order_precision(20, 0) == pytest.approx(1.125)
        assert second_order_precision(20, 1) == pytest.approx(17 / 15)

    def test_limit(self):
        assert second_order_precision(10 ** 7, 3) == pytest.approx(1.0, abs=1e-6)

    def test_undefined(self):
        with pytest.raises(ValueError):
            second_order_precision(10, 6)


class TestBinary:
    def test_balanced(self):
        assert binary_covariate_multiplier(10, 10) == pytest.approx((0.1, 0.1))

    def test_unbalanced(self):
        un, bal = binary_covariate_multiplier(10, 2)
        assert un == pytest.approx(10 / 36) and bal == 0.1

    def test_symmetry(self):
        assert binary_covariate_multiplier(10, 18) == binary_covariate_multiplier(10, 2)

    @pytest.mark.parametrize("f", [0, 20])
    def test_empty_cell(self, f):
        with pytest.raises(ValueError):
            binary_covariate_multiplier(10, f)

    def test_identity_and_minimum(self):
        for N in (1, 5, 12):
            for f in range(1, 2 * N):
                un, bal = binary_covariate_multiplier(N, f)
                assert un * f * (2 * N - f) == pytest.approx(N)
                assert un >= bal - 1e-15
                assert (abs(un - bal) < 1e-15) == (f == N)

    def test_matches_design_matrix(self):
        # stratified estimate variance equals the treatment diagonal of (X'X)^-1
        # for the main-effects model with the binary covariate
        N, f = 6, 4
        z = np.r_[np.zeros(2 * N), np.ones(2 * N)]
        female = np.r_[np.ones(f), np.zeros(2 * N - f), np.ones(2 * N - f), np.zeros(f)]
        X = np.column_stack([np.ones(4 * N), z, female])
        q = np.linalg.inv(X.T @ X)[1, 1]
        assert q == pytest.approx(binary_covariate_multiplier(N, f)[0])


class TestDecision:
    def test_fit_score(self):
        rep = score_vs_covariates(AncovaInputs(100, 5, 1.02, 1.0))
        assert rep.fit_score and rep.verdict == FIT_SCORE
        assert rep.imbalance_effect == pytest.approx(96 / 92)
        assert rep.margin == pytest.approx(96 / 92 - 1.02)
        assert rep.margin == pytest.approx(0.0235, abs=1e-4)

    def test_insufficient(self):
        rep = score_vs_covariates(AncovaInputs(100, 5, 1.10, 1.0))
        assert not rep.fit_score and rep.verdict == INSUFFICIENT

    @pytest.mark.parametrize("n,k", [(10, 2), (30, 26), (100, 5), (1000, 50)])
    def test_equal_mse_always_fits(self, n, k):
        assert score_vs_covariates(AncovaInputs(n, k, 2.0, 2.0)).fit_score

    def test_k_one_rejected(self):
        with pytest.raises(ValueError, match="k = 1"):
            score_vs_covariates(AncovaInputs(100, 1, 1.0, 1.0))

    def test_second_order_fields(self):
        rep = score_vs_covariates(AncovaInputs(100, 5, 1.0, 1.0))
        assert rep.second_order_unadjusted == pytest.approx(98 / 96)
        assert rep.second_order_score == pytest.approx(97 / 95)
        assert rep.second_order_full == pytest.approx(93 / 91)
        assert rep.second_order_full > rep.second_order_score > 1

    def test_second_order_absent_at_boundary(self):
        rep = score_vs_covariates(AncovaInputs(10, 6, 1.0, 1.0))
        assert rep.second_order_full is None
        assert rep.second_order_score is not None

    def test_monotone_in_k(self):
        for ratio in (1.0, 1.02, 1.05, 1.2):
            accepted = [score_vs_covariates(AncovaInputs(60, k, ratio, 1.0)).fit_score
                        for k in range(2, 57)]
            first = accepted.index(True) if True in accepted else len(accepted)
            assert all(accepted[first:])

    def test_json(self):
        rep = score_vs_covariates(AncovaInputs(100, 5, 1.02, 1.0))
        d = json.loads(json.dumps(rep.to_dict()))
        assert d["fit_score"] is True and d["note"]
