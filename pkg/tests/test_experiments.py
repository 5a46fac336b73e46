import json
import math

import numpy as np
import pytest

from radext.experiments import (
    CheckRecord,
    EXACT_SCALING_TOL,
    Params,
    Report,
    ZeroSeminormError,
    _one_d_kernel_integral,
    chart_report,
    check_decomposition,
    check_lp_identity,
    compute_J,
    derivative_check,
    divergence_probe,
    j_oracle,
    kernel_bound_scan,
    operator_sweep,
    scaling_law,
    verdict_compare,
)
from radext.functions import make_test_function
from radext.norms import EstimatorConfig

IMP = EstimatorConfig(samples=20_000, mode="radial-importance")


def test_params_validation_and_properties():
    with pytest.raises(ValueError):
        Params(1, 0.5, 2)
    with pytest.raises(ValueError):
        Params(2, 0.0, 2)
    with pytest.raises(ValueError):
        Params(2, 0.5, 0.9)
    with pytest.raises(ValueError):
        Params(2, 0.5, math.inf)
    pr = Params(3, 1.5, 2, a=0.25)
    assert pr.order == 1
    assert pr.sigma == 0.5
    assert pr.wellposed  # (1.5 - 0.25) * 2 = 2.5 < 3
    assert not Params(2, 1.0, 2).wellposed  # equality counts as divergent
    assert pr.as_dict() == {"n": 3, "s": 1.5, "p": 2, "a": 0.25}


def test_verdict_compare_branches():
    # exact agreement passes, even with zero stderr
    assert verdict_compare("x", 1.0, 1.0, 0.0, 0.01).verdict == "pass"
    # deterministic comparisons are judged on the floor alone
    assert verdict_compare("x", 1.0, 1.004, 0.0, 0.01).verdict == "pass"
    assert verdict_compare("x", 1.0, 1.02, 0.0, 0.01).verdict == "fail"
    # statistical: within three sigma and within the floor
    assert verdict_compare("x", 1.0, 1.004, 0.002, 0.01).verdict == "pass"
    # compatible but too noisy to certify the floor
    assert verdict_compare("x", 1.0, 1.02, 0.05, 0.01).verdict == "inconclusive"
    # outside three sigma
    assert verdict_compare("x", 1.0, 1.2, 0.01, 0.5).verdict == "fail"
    # an infinite floor turns the check purely statistical
    assert verdict_compare("x", 1.0, 1.1, 0.05, math.inf).verdict == "pass"
    assert verdict_compare("x", 1.0, 1.4, 0.05, math.inf).verdict == "fail"
    # explicit scale
    rec = verdict_compare("x", 0.001, 0.002, 0.0, 0.01, scale=1.0)
    assert rec.verdict == "pass" and rec.tolerance == 0.01


def test_report_serialization():
    rec = CheckRecord("inf_tol", 1.0, 1.0, 0.0, math.inf, "pass")
    rep = Report("demo", {"n": 2}, "pass", [rec], {"note": "x"}, 0, 100)
    payload = rep.as_dict()
    assert payload["checks"][0]["tolerance"] is None
    text = json.dumps(payload)
    assert json.loads(text)["verdict"] == "pass"
    rows = rep.rows()
    assert rows[0]["experiment"] == "demo"
    assert rows[0]["check"] == "inf_tol"


def test_j_oracle_frozen_values():
    assert abs(j_oracle(2, 0.5, 2) - 1.197816266794) < 1e-9
    # n = 3, s = 1/2, p = 2 collapses to 2 pi / 3 in closed form
    assert abs(j_oracle(3, 0.5, 2) - 2.0 * math.pi / 3.0) < 5e-12


def test_kernel_constant_closed_form():
    # int (1 + u^2)^{-3/2} du = 2, so C = 2^{(n-1+sp)/2} * 2 = 4 at
    # n = 2, s = 1/2, p = 2
    assert _one_d_kernel_integral(3.0) == pytest.approx(2.0, abs=1e-14)
    rep = kernel_bound_scan(Params(2, 0.5, 2), pairs=200)
    assert rep.verdict == "pass"
    assert rep.details["analytic_constant"] == pytest.approx(4.0, abs=1e-10)
    labels = [c.label for c in rep.checks]
    assert labels == ["analytic_constant_quadrature", "kernel_ratio_max",
                      "obtuse_pairs_bounded"]
    assert rep.details["max_ratio"] <= 1.0 + 1e-8


def test_lp_identity_report():
    rep = check_lp_identity(Params(3, 0.5, 2, 0.5),
                            cfg=EstimatorConfig(samples=20_000))
    assert rep.verdict == "pass"
    # constant boundary data makes both sides pi
    assert rep.details["ball_lp_power"] == pytest.approx(math.pi, rel=0.05)
    assert rep.details["constant"] == 0.25
    with pytest.raises(ValueError):
        check_lp_identity(Params(2, 0.5, 2, a=-1.0))


def test_decomposition_report():
    rep = check_decomposition(Params(2, 0.5, 2, 0.0),
                              cfg=EstimatorConfig(samples=100_000,
                                                  mode="radial-importance"))
    assert rep.verdict == "pass"
    assert set(rep.details["splits"]) == {
        "near_origin", "boundary_difference", "weight_defect"}
    assert rep.details["prefactor"] == pytest.approx(2.0)

    with pytest.raises(ValueError):
        check_decomposition(Params(2, 1.5, 2))
    with pytest.raises(ValueError):
        check_decomposition(Params(2, 0.9, 4))  # (s - a) p >= n


def test_decomposition_constant_data_is_exactly_zero():
    f = make_test_function("constant", 2)
    rep = check_decomposition(Params(2, 0.5, 2, 0.0), f=f,
                              cfg=EstimatorConfig(samples=10_000))
    assert rep.verdict == "pass"
    assert rep.details["lhs_seminorm_power"] == 0.0
    assert rep.details["rhs_triple_integral"] == 0.0
    zero_splits = [c for c in rep.checks if c.note == "identically zero split"]
    assert len(zero_splits) == 3  # every split vanishes for constant data


def test_compute_j_report():
    rep = compute_J(Params(2, 0.5, 2), cfg=EstimatorConfig(samples=200_000))
    assert rep.verdict == "pass"
    assert rep.details["oracle"] == pytest.approx(j_oracle(2, 0.5, 2))
    labels = [c.label for c in rep.checks]
    assert labels == ["oracle_agreement", "doubling_stability",
                      "base_point_independence"]


def test_scaling_law_exact_and_independent():
    rep = scaling_law(Params(2, 0.5, 2), j_list=(0, 1, 2), cfg=IMP, mode="both")
    assert rep.verdict == "pass"
    for j, ratio in rep.details["measured_ratios"].items():
        predicted = 2.0 ** (int(j) * rep.details["log2_ratio_per_level"])
        assert abs(ratio - predicted) / predicted <= EXACT_SCALING_TOL
    with pytest.raises(ValueError):
        scaling_law(Params(2, 0.5, 2), mode="fancy")


def test_scaling_law_negative_weight():
    rep = scaling_law(Params(2, 0.5, 2, a=-1.0), j_list=(0, 1, 2),
                      cfg=EstimatorConfig(samples=5000,
                                          mode="radial-importance"))
    assert rep.verdict == "pass"
    assert rep.details["log2_ratio_per_level"] == 1.0


def test_scaling_law_rejects_flat_data():
    f = make_test_function("constant", 2)
    with pytest.raises(ZeroSeminormError):
        scaling_law(Params(2, 0.5, 2), f=f,
                    cfg=EstimatorConfig(samples=2000))


def test_divergence_probe_both_sides():
    good = divergence_probe(Params(2, 0.4, 2), cfg=IMP)
    assert good.verdict == "pass"
    assert good.details["limit"] is not None
    assert good.details["measured_ratio"] < 1.0

    bad = divergence_probe(Params(2, 1.5, 2), cfg=IMP)
    assert bad.verdict == "pass"
    assert bad.details["limit"] is None
    assert bad.details["measured_ratio"] >= 1.0
    sums = [row["sum"] for row in bad.details["partial_sums"]]
    assert sums == sorted(sums)

    f = make_test_function("constant", 2)
    with pytest.raises(ZeroSeminormError):
        divergence_probe(Params(2, 0.5, 2), f=f,
                         cfg=EstimatorConfig(samples=2000))


def test_operator_sweep_ball():
    rep = operator_sweep(Params(2, 0.5, 2), count=2,
                         cfg=EstimatorConfig(samples=5000,
                                             mode="radial-importance"))
    assert rep.verdict == "pass"
    assert len(rep.details["ratios"]) == 4
    assert all(np.isfinite(rep.details["ratios"]))
    assert rep.details["max_full"] >= rep.details["median_ratio"] > 0
    assert rep.details["geometry"] == "ball"
    assert "outside_wellposed_range" not in rep.details


def test_operator_sweep_cube():
    rep = operator_sweep(Params(2, 0.5, 2), count=2,
                         cfg=EstimatorConfig(samples=5000,
                                             mode="radial-importance"),
                         geometry="cube")
    assert rep.verdict == "pass"
    assert rep.details["geometry"] == "cube"


def test_operator_sweep_validation_and_labelling():
    with pytest.raises(ValueError):
        operator_sweep(Params(2, 0.5, 2), geometry="torus")
    with pytest.raises(ValueError):
        operator_sweep(Params(2, 1.5, 2), geometry="cube")
    with pytest.raises(ValueError):
        operator_sweep(Params(2, 0.5, 2, a=0.5), geometry="cube")
    rep = operator_sweep(Params(2, 1.5, 2), count=1,
                         cfg=EstimatorConfig(samples=2000,
                                             mode="radial-importance"))
    assert "outside_wellposed_range" in rep.details


def test_derivative_check_quick():
    rep = derivative_check(Params(2, 0.5, 2, a=0.5), max_order=2, points=20)
    assert rep.verdict == "pass"
    assert rep.details["worst_relative_error"] < 1e-6
    assert abs(rep.details["slope"] - 2.0) <= 0.1
    # k = 2 crosses the divergence edge at these exponents
    assert rep.details["moments"]["1"]["divergent"] is False
    assert rep.details["moments"]["2"]["divergent"] is True
    assert any(c.label.startswith("radial_moment_divergent:k=2")
               for c in rep.checks)
    text = json.dumps(rep.as_dict())
    assert "radial_moment" in text


def test_chart_report():
    rep = chart_report(n=3, target_radius=0.5, probe=2000)
    assert rep.verdict == "pass"
    assert rep.details["eps"] == pytest.approx(0.22975292054736118, abs=1e-14)
    assert abs(rep.details["image_radius"] - 0.5) <= 1e-12
    assert rep.details["round_trip_max_error"] <= 1e-12
