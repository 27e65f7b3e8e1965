import json
import math

import numpy as np
import pytest

from roughspde.grid import make_grid, make_ladder
from roughspde.harness import (
    ConvergenceReport,
    ExperimentConfig,
    FitResult,
    check_report,
    default_config,
    exact_coupled_error_sq,
    exact_mode_second_moments,
    fit_rate,
    run_fem_convergence,
    run_h1_scaling,
    run_lemma_checks,
    run_noise_checks,
    run_norm_scaling,
    run_spectral_convergence,
    run_wz_convergence,
)
from roughspde.harness import _flag_monotone, _offset_power_fit
from roughspde.noise import aggregate, sample_cell_increments, spatial_covariance
from roughspde.problem import DriftSpec, InitialData
from roughspde.wave import solve_swe_spectral
from roughspde.wz import regularize


# ---------------------------------------------------------------------------
# rate fitting


def test_fit_rate_exact_power_laws():
    x = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    for slope, c in ((1.0, 2.0), (2.0, 0.3)):
        fit = fit_rate(x, c * x**slope)
        assert fit.rate == pytest.approx(slope, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(c), abs=1e-10)


def test_fit_rate_with_noise():
    rng = np.random.default_rng(0)
    x = 1.0 / 2 ** np.arange(3, 9)
    e = 1.3 * x**0.5 * np.exp(0.1 * rng.standard_normal(len(x)))
    fit = fit_rate(x, e)
    assert fit.rate == pytest.approx(0.5, abs=0.1)
    assert fit.half_width > 0.0


def test_fit_rate_weighting_prefers_precise_points():
    x = np.array([1 / 4, 1 / 8, 1 / 16, 1 / 32])
    e = x**1.0
    e_noisy = e.copy()
    e_noisy[0] *= 2.0  # corrupt one point, give it a huge SE
    ses = np.array([e[0] * 10.0, 1e-8, 1e-8, 1e-8])
    fit = fit_rate(x, e_noisy, ses)
    assert fit.rate == pytest.approx(1.0, abs=0.02)


def test_fit_rate_rejects_degenerate_input():
    with pytest.raises(ValueError):
        fit_rate([1 / 4, 1 / 8], [0.1, 0.05])
    with pytest.raises(ValueError):
        fit_rate([1 / 4, 1 / 8, 1 / 16], [0.1, 0.0, 0.01])


def test_offset_power_fit_recovers_exponent():
    lam = (np.arange(1, 65) * np.pi) ** 2
    v = 3.0 * lam**0.25 - 1.7
    assert _offset_power_fit(lam, v, 0.4) == pytest.approx(0.25, abs=1e-6)


# ---------------------------------------------------------------------------
# exact second-moment oracles vs Monte Carlo


def test_exact_wave_moments_match_mc():
    grid = make_grid(0.5, 8, 8)
    H, N, S = 0.3, 6, 400
    acc = np.zeros(N)
    for s in range(S):
        xi = regularize(sample_cell_increments(grid, H, 99, sample_id=s))
        st = solve_swe_spectral(xi, InitialData.zero(), InitialData.zero(),
                                DriftSpec.zero(), n_modes=N)
        acc += st.coeffs**2
    mean = acc / S
    exact = exact_mode_second_moments("wave", H, grid, N, grid.T)
    z = (mean - exact) / (math.sqrt(2.0 / S) * exact)
    assert np.max(np.abs(z)) < 4.0


def test_exact_coupled_error_matches_mc():
    fine = make_grid(0.5, 8, 8)
    coarse = make_grid(0.5, 2, 2)
    H, N, S = 0.3, 16, 300
    vals = np.empty(S)
    for s in range(S):
        ci = sample_cell_increments(fine, H, 7, sample_id=s)
        uf = solve_swe_spectral(regularize(ci), InitialData.zero(), InitialData.zero(),
                                DriftSpec.zero(), n_modes=N).coeffs
        uc = solve_swe_spectral(regularize(aggregate(ci, coarse)), InitialData.zero(),
                                InitialData.zero(), DriftSpec.zero(), n_modes=N).coeffs
        vals[s] = np.sum((uf - uc) ** 2)
    exact = exact_coupled_error_sq("wave", H, coarse, fine, N, 0.5)
    z = (vals.mean() - exact) / (vals.std(ddof=1) / math.sqrt(S))
    assert abs(z) < 4.0


def test_exact_coupled_error_guards():
    fine = make_grid(0.5, 8, 8)
    with pytest.raises(ValueError):
        exact_coupled_error_sq("heat", 0.3, make_grid(0.5, 3, 3), fine, 8, 0.5)
    with pytest.raises(ValueError):
        exact_coupled_error_sq("heat", 0.3, make_grid(0.5, 2, 2), fine, 8, 0.21)


def test_exact_rate_at_white_noise_is_half():
    """H = 1/2 coupled heat ladder: exact strong rate ~ 1/2 in h.

    The reference sits 8x beyond the finest fitted level; at 4x (the ladder
    minimum) the last level's error is biased low by reference proximity."""
    ladder = make_ladder(0.5, [8, 16, 32, 256], "k=h^2")
    grids = list(ladder)
    fine = grids[-1]
    errs = [
        math.sqrt(exact_coupled_error_sq("heat", 0.5, g, fine, 128, 0.5))
        for g in grids[:-1]
    ]
    fit = fit_rate([g.h for g in grids[:-1]], errs)
    assert fit.rate == pytest.approx(0.5, abs=0.1)


# ---------------------------------------------------------------------------
# configuration


def test_config_roundtrip_and_digest():
    cfg = default_config("she-wz", H=0.25, samples=10,
                         drift=DriftSpec.affine(0.5, 0.1),
                         u0=InitialData.single_mode(2, 0.3))
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()
    assert back.digest() == cfg.digest()
    assert back.drift == cfg.drift
    assert back.u0.kind == "mode" and back.u0.mode == 2 and back.u0.amplitude == 0.3
    assert len(cfg.digest()) == 16


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-euler")
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", H=0.7)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", samples=1)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", p=0)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", eval_time=0.9, T=0.5)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", n_levels=(8, 16))
    with pytest.raises(ValueError):
        ExperimentConfig(kind="swe-spectral", N_levels=(4, 8))
    with pytest.raises(ValueError):
        ExperimentConfig(kind="she-wz", n_levels=(8, 16, 32), m_levels=(4, 8))
    with pytest.raises(ValueError):
        default_config("she-euler")


def test_ladder_reference_constraints():
    cfg = default_config("she-wz", n_levels=(8, 16, 32), n_ref=96)
    with pytest.raises(ValueError):
        cfg.ladder()  # 96 not a multiple of 32
    cfg = default_config("she-wz", n_levels=(8, 16, 32), n_ref=64)
    with pytest.raises(ValueError):
        cfg.ladder()  # < 4x finest
    cfg = default_config("she-wz", n_levels=(8, 16, 32), n_ref=128)
    grids = list(cfg.ladder())
    assert grids[-1].n == 128
    cfg = default_config(
        "she-wz", n_levels=(8, 16, 32), m_levels=(2, 4, 8), n_ref=128
    )
    with pytest.raises(ValueError):
        cfg.ladder()  # explicit ladder without m_ref


def test_default_configs_have_study_couplings():
    assert default_config("she-wz").coupling == "k=h^2"
    assert default_config("swe-wz").coupling == "k=h"
    assert default_config("swe-spectral").u0.kind == "powerlaw"
    assert default_config("noise-check").samples == 100_000


# ---------------------------------------------------------------------------
# the coupled WZ runner


def _tiny_wz(**over):
    base = dict(
        n_levels=(4, 8, 16), n_ref=64, n_modes=32, samples=16, seed=123, T=0.5
    )
    base.update(over)
    return default_config("she-wz", **base)


def test_wz_report_shape_and_extras():
    rep = run_wz_convergence(_tiny_wz())
    assert rep.axis == "h"
    assert [r["level"] for r in rep.levels] == [0, 1, 2]
    assert all(set(r) >= {"level", "h", "k", "N", "error", "se", "samples"} for r in rep.levels)
    assert len(rep.ratios) == 2
    assert rep.extras["target_rate"] == 0.3
    assert rep.extras["reference"]["h"] == 1 / 64
    assert "monotone_refinement" in rep.extras
    assert rep.wall_time > 0.0


def test_wz_bitwise_reproducible_and_thread_invariant():
    a = run_wz_convergence(_tiny_wz())
    b = run_wz_convergence(_tiny_wz())
    c = run_wz_convergence(_tiny_wz(threads=2))
    for x, y in ((a, b), (a, c)):
        assert [r["error"] for r in x.levels] == [r["error"] for r in y.levels]
        assert [r["se"] for r in x.levels] == [r["se"] for r in y.levels]


def test_wz_seed_changes_results():
    a = run_wz_convergence(_tiny_wz())
    b = run_wz_convergence(_tiny_wz(seed=124))
    assert [r["error"] for r in a.levels] != [r["error"] for r in b.levels]


def test_wz_levels_match_exact_second_moments():
    """Per-level MC moment within 4 SE of the exact coupled-difference value."""
    cfg = _tiny_wz(samples=64)
    rep = run_wz_convergence(cfg)
    grids = list(cfg.ladder())
    fine = grids[-1]
    for row, g in zip(rep.levels, grids[:-1]):
        exact = math.sqrt(
            exact_coupled_error_sq("heat", cfg.H, g, fine, cfg.n_modes, cfg.T)
        )
        assert abs(row["error"] - exact) < 4.0 * row["se"]


def test_wz_eval_time_midpoint():
    cfg = _tiny_wz(eval_time=0.25)
    rep = run_wz_convergence(cfg)
    assert rep.extras["error_time"] == 0.25
    grids = list(cfg.ladder())
    fine = grids[-1]
    exact = math.sqrt(
        exact_coupled_error_sq("heat", cfg.H, grids[0], fine, cfg.n_modes, 0.25)
    )
    assert abs(rep.levels[0]["error"] - exact) < 4.0 * rep.levels[0]["se"]


def test_wz_eval_time_must_hit_slab_edges():
    # coarsest level (n=4, k=h^2) has k = 1/16: 0.3 is not an edge
    with pytest.raises(ValueError):
        run_wz_convergence(_tiny_wz(eval_time=0.3))


def test_wz_rejects_wrong_kind():
    with pytest.raises(ValueError):
        run_wz_convergence(default_config("she-fem"))


# ---------------------------------------------------------------------------
# FEM and spectral runners


def test_fem_runner_smoke_and_reference_doubling():
    cfg = default_config(
        "she-fem", T=0.25, n_levels=(4, 8, 16), ref_mult=16, samples=8, seed=5,
        substeps=2,
    )
    rep = run_fem_convergence(cfg)
    assert rep.axis == "h"
    assert rep.extras["theory_exponent"] == pytest.approx(min(0.3, 0.5 - 0.01))
    assert math.isfinite(rep.fit.rate)
    # doubling the reference mode multiplier moves no level error by more than 5%
    rep2 = run_fem_convergence(
        default_config("she-fem", T=0.25, n_levels=(4, 8, 16), ref_mult=32,
                       samples=8, seed=5, substeps=2)
    )
    for a, b in zip(rep.levels, rep2.levels):
        assert abs(a["error"] - b["error"]) / a["error"] <= 0.05


def test_spectral_runner_returns_mode_and_grid_reports():
    cfg = default_config(
        "swe-spectral", N_levels=(4, 8, 16), n_fixed=16, ref_mult=8,
        h_levels=(8, 16, 32), samples=8, seed=5,
    )
    rep_n, rep_h = run_spectral_convergence(cfg)
    assert rep_n.axis == "N" and rep_h.axis == "h"
    assert rep_n.extras["target_rate"] == -1.0
    assert rep_h.extras["target_rate"] == pytest.approx(0.3 - 1.0)
    assert rep_n.extras["reference_modes"] == 8 * 16
    assert [r["N"] for r in rep_n.levels] == [4, 8, 16]
    assert [round(1 / r["h"]) for r in rep_h.levels] == [8, 16, 32]
    # the h-study grids sit on the short pre-dispersion horizon, one slab each
    assert all(r["k"] == cfg.h_study_T for r in rep_h.levels)
    assert "pre-dispersion" in rep_h.extras["regime"]


def test_spectral_runner_reference_doubling():
    mk = lambda mult: default_config(
        "swe-spectral", N_levels=(4, 8, 16), n_fixed=16, ref_mult=mult,
        h_levels=(8, 16, 32), samples=8, seed=5,
    )
    (n1, h1), (n2, h2) = run_spectral_convergence(mk(8)), run_spectral_convergence(mk(16))
    for a, b in zip(n1.levels + h1.levels, n2.levels + h2.levels):
        assert abs(a["error"] - b["error"]) / a["error"] <= 0.05


def test_spectral_runner_rejects_drift():
    cfg = default_config("swe-spectral", drift=DriftSpec.named("sin"), samples=4)
    with pytest.raises(NotImplementedError):
        run_spectral_convergence(cfg)


def test_h1_scaling_smoke():
    cfg = default_config(
        "swe-spectral", n_levels=(8, 16, 32), coupling="k=h", samples=16, seed=5
    )
    rep = run_h1_scaling(cfg)
    assert rep.extras["target_rate"] == pytest.approx(-0.7)
    assert rep.extras["quantity"].startswith("(E ||u~(T)||_1^2)")
    # norms grow as the grid refines
    errs = [r["error"] for r in rep.levels]
    assert errs[0] < errs[-1]
    assert rep.fit.rate < 0.0


# ---------------------------------------------------------------------------
# check suites


def test_noise_checks_structure():
    res = run_noise_checks(default_config("noise-check", samples=4000))
    assert set(res) >= {
        "isometry_equivalence", "sampler_covariance", "sampler_isometry",
        "aggregation", "passed", "wall_time_s",
    }
    assert res["isometry_equivalence"]["cases"] == 50
    assert res["isometry_equivalence"]["passed"]
    assert res["aggregation"]["passed"]
    assert res["sampler_covariance"]["offdiagonal_negative"]


def test_lemma_checks_pass():
    res = run_lemma_checks(default_config("lemma-check"))
    assert res["passed"]
    assert res["sin_sum"]["max_ratio"] <= res["sin_sum"]["bound"]
    for H in ("H=0.1", "H=0.25", "H=0.4"):
        block = res["sobolev_integral"][H]
        assert abs(block["slope"] - block["target"]) <= block["slope_tol"]
        assert block["explicit_bound_ok"]
    for kind in ("heat", "wave"):
        assert res["psi_upsilon"][kind]["passed"]
        assert res["kernel_sum"][kind]["passed"]


def test_norm_scaling_smoke_and_flag():
    res = run_norm_scaling(default_config("norm-scaling", samples=64, H=0.3))
    assert res["e_h"] == pytest.approx(2 * 0.3 - 2.0, abs=0.15)
    assert res["e_k"] == pytest.approx(-1.0, abs=0.15)
    assert res["closed_form_within_4se"]
    assert "paper_form_flag" in res
    res_w = run_norm_scaling(default_config("norm-scaling", samples=64, H=0.5))
    assert "paper_form_flag" not in res_w


# ---------------------------------------------------------------------------
# reports: policy, flags, serialization


def _fake_report(rate, extras):
    return ConvergenceReport(
        kind="she-wz", axis="h",
        levels=[dict(level=0, h=0.125, k=0.015625, N=32, error=0.1, se=0.01, samples=4)],
        fit=FitResult(rate=rate, half_width=0.01, intercept=0.0),
        ratios=[], config={}, extras=extras,
    )


def test_check_report_policy():
    assert check_report(_fake_report(0.32, {"target_rate": 0.3, "rate_tol": 0.1}))
    assert not check_report(_fake_report(0.45, {"target_rate": 0.3, "rate_tol": 0.1}))
    assert not check_report(_fake_report(0.3, {}))  # no target recorded
    assert not check_report(_fake_report(float("nan"), {"target_rate": 0.3}))
    good = {"target_rate": 0.3, "rate_tol": 0.1,
            "h1_exponent": -0.72, "h1_target": -0.7, "h1_tol": 0.15}
    assert check_report(_fake_report(0.3, good))
    bad = dict(good, h1_exponent=-0.3)
    assert not check_report(_fake_report(0.3, bad))


def test_flag_monotone():
    extras = {}
    _flag_monotone([{"error": 3.0}, {"error": 2.0}, {"error": 1.0}], "h", extras)
    assert extras["monotone_refinement"]
    extras = {}
    _flag_monotone([{"error": 1.0}, {"error": 2.0}], "h", extras)
    assert not extras["monotone_refinement"]
    assert "monotone_violation" in extras


def test_write_csv_and_sidecar(tmp_path):
    rep = run_wz_convergence(_tiny_wz(samples=4))
    out = tmp_path / "study.csv"
    rep.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "level,h,k,N,error,se,samples"
    assert len(lines) == 4
    fields = lines[1].split(",")
    assert int(fields[0]) == 0 and int(fields[6]) == 4
    # 17 significant digits: values round-trip bit-for-bit
    assert float(fields[4]) == rep.levels[0]["error"]
    assert float(fields[1]) == rep.levels[0]["h"]
    meta = json.loads((tmp_path / "study.meta.json").read_text())
    assert meta["kind"] == "she-wz" and meta["axis"] == "h"
    assert set(meta) >= {
        "levels", "fit", "ratios", "config", "config_digest", "extras",
        "wall_time_s", "backend", "version", "git_describe",
    }
    assert meta["config"]["seed"] == 123
    assert meta["fit"]["rate"] == rep.fit.rate
    assert meta["backend"] in ("compiled", "python")


def test_summary_mentions_rate_and_levels():
    rep = run_wz_convergence(_tiny_wz(samples=4))
    text = rep.summary()
    assert "rate" in text and "level 0" in text and "h=1/4" in text
