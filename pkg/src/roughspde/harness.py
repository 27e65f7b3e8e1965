"""Monte Carlo experiment harness: coupled convergence studies, check suites, reports.

Conventions shared by every study:

* samples are the unit of parallelism; sample s of a run draws its noise from
  a counter-based stream keyed by (seed, sample-id), so results are bitwise
  reproducible for a given config + seed regardless of thread count;
* coupled ladders draw the finest grid's increments once per sample and
  aggregate them exactly to the coarser levels;
* errors are measured at t = T (configurable, recorded in the report) and
  p-th moments are reported as (mean err^p)^{1/p} with delta-method standard
  errors; accumulators are arrays indexed by sample id reduced with NumPy's
  pairwise summation;
* fitted rates come from weighted least squares on the log-log points, with a
  confidence half-width from the weighted residual variance.

The module also carries exact second-moment calculators for the linear
(zero-drift) solutions; they are the independent route the test-suite uses to
validate the Monte Carlo machinery end to end.
"""

from __future__ import annotations

import hashlib
import json
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import basis, kernels
from .basis import HEAT, WAVE
from .grid import Grid, GridLadder, make_grid, make_ladder
from .heat import l2_error, solve_she_fem, solve_she_spectral
from .noise import (
    NoiseModel,
    StepFunction2D,
    aggregate,
    increment_covariance_form,
    ito_isometry_variance,
    sample_cell_increments,
    sampler_isometry_check,
    spatial_covariance,
)
from .problem import DriftSpec, InitialData
from .wave import h1_norm, solve_swe_spectral
from .wz import l2_norm_sq_closed_form, regularize

__all__ = [
    "ExperimentConfig",
    "FitResult",
    "ConvergenceReport",
    "default_config",
    "fit_rate",
    "run_wz_convergence",
    "run_fem_convergence",
    "run_spectral_convergence",
    "run_h1_scaling",
    "run_noise_checks",
    "run_lemma_checks",
    "run_norm_scaling",
    "check_report",
    "exact_mode_second_moments",
    "exact_coupled_error_sq",
]

CONVERGE_KINDS = ("she-wz", "swe-wz", "she-fem", "swe-spectral")
CHECK_KINDS = ("noise-check", "noise-isometry", "lemma-check", "lemma-checks", "norm-scaling")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one harness run; JSON round-trippable."""

    kind: str
    H: float = 0.3
    T: float = 0.5
    n_levels: tuple = (8, 16, 32, 64)
    n_ref: int = 256  # reference space resolution for coupled WZ ladders
    coupling: str = "k=h^2"
    m_levels: tuple | None = None  # explicit slab counts (mixed-term studies)
    m_ref: int | None = None
    n_modes: int = 512  # solver modes for WZ studies (common across levels)
    ref_mult: int = 16  # reference-mode multiplier (FEM / spectral studies)
    N_levels: tuple = (4, 8, 16, 32)  # mode ladder (swe-spectral)
    N_fixed: int = 8  # fixed mode count for the h-ladder part (swe-spectral)
    n_fixed: int = 32  # fixed space resolution for the N-ladder part
    h_levels: tuple = (32, 64, 128, 256)  # space ladder for the h-factor study
    h_study_T: float | None = 1.0 / 2048.0  # short horizon (k = T, one slab); None -> T, k=h
    drift: DriftSpec = field(default_factory=DriftSpec.zero)
    u0: InitialData = field(default_factory=InitialData.zero)
    v0: InitialData = field(default_factory=InitialData.zero)
    samples: int = 200
    seed: int = 20240811
    p: int = 2
    epsilon: float = 0.01  # reported in FEM rate predictions, never assumed
    substeps: int = 4  # FEM substeps per slab
    substeps_spectral: int = 8  # drift substeps per slab (spectral solvers)
    threads: int = 1
    eval_time: float | None = None  # error time; None means T

    def __post_init__(self):
        if self.kind not in CONVERGE_KINDS + CHECK_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        NoiseModel(self.H)  # validates H in (0, 1/2]
        if self.samples < 2:
            raise ValueError("need at least 2 samples")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.eval_time is not None and not 0.0 < self.eval_time <= self.T:
            raise ValueError("eval_time must lie in (0, T]")
        if self.kind in CONVERGE_KINDS:
            if self.kind == "swe-spectral" and len(self.N_levels) < 3:
                raise ValueError("need at least 3 mode-ladder levels to fit a rate")
            if len(self.n_levels) < 3:
                raise ValueError("need at least 3 ladder levels to fit a rate")
        if self.m_levels is not None and len(self.m_levels) != len(self.n_levels):
            raise ValueError("m_levels must pair up with n_levels")

    @property
    def error_time(self) -> float:
        return self.T if self.eval_time is None else self.eval_time

    def ladder(self) -> GridLadder:
        ns = list(self.n_levels)
        with_ref = self.kind in ("she-wz", "swe-wz")
        if with_ref:
            if self.n_ref % max(ns) != 0 or self.n_ref < 4 * max(ns):
                raise ValueError("reference resolution must be >= 4x the finest level and nested")
            ns = ns + [self.n_ref]
        if self.m_levels is None:
            return make_ladder(self.T, ns, self.coupling)
        ms = list(self.m_levels)
        if with_ref:
            if self.m_ref is None:
                raise ValueError("explicit ladders need m_ref alongside n_ref")
            ms = ms + [self.m_ref]
        grids = [make_grid(self.T, m, n) for m, n in zip(ms, ns)]
        return GridLadder(grids, coupling="explicit")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "H": self.H,
            "T": self.T,
            "n_levels": list(self.n_levels),
            "n_ref": self.n_ref,
            "coupling": self.coupling,
            "m_levels": list(self.m_levels) if self.m_levels is not None else None,
            "m_ref": self.m_ref,
            "n_modes": self.n_modes,
            "ref_mult": self.ref_mult,
            "N_levels": list(self.N_levels),
            "N_fixed": self.N_fixed,
            "n_fixed": self.n_fixed,
            "h_levels": list(self.h_levels),
            "h_study_T": self.h_study_T,
            "drift": self.drift.to_dict(),
            "u0": self.u0.to_dict(),
            "v0": self.v0.to_dict(),
            "samples": self.samples,
            "seed": self.seed,
            "p": self.p,
            "epsilon": self.epsilon,
            "substeps": self.substeps,
            "substeps_spectral": self.substeps_spectral,
            "threads": self.threads,
            "eval_time": self.eval_time,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("n_levels", "N_levels", "m_levels", "h_levels"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        for key, conv in (("drift", DriftSpec), ("u0", InitialData), ("v0", InitialData)):
            if key in d and isinstance(d[key], dict):
                d[key] = conv.from_dict(d[key])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


def default_config(kind: str, **overrides) -> ExperimentConfig:
    """Acceptance-grade defaults per study kind; keyword overrides applied on top."""
    base = {
        "she-wz": dict(kind="she-wz", coupling="k=h^2"),
        "swe-wz": dict(kind="swe-wz", coupling="k=h"),
        "she-fem": dict(kind="she-fem", coupling="k=h^2", n_modes=0, ref_mult=16),
        "swe-spectral": dict(
            kind="swe-spectral",
            coupling="k=h",
            ref_mult=32,
            u0=InitialData.powerlaw(8.0, -1.5),
        ),
        "noise-check": dict(kind="noise-check", samples=100_000, seed=20240811),
        "lemma-check": dict(kind="lemma-check", T=1.0),
        "norm-scaling": dict(kind="norm-scaling", samples=256),
    }
    if kind not in base:
        raise ValueError(f"unknown kind {kind!r}")
    cfg = base[kind]
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class FitResult:
    rate: float
    half_width: float
    intercept: float

    def to_dict(self) -> dict:
        return {"rate": self.rate, "half_width": self.half_width, "intercept": self.intercept}


def fit_rate(x, errors, ses=None) -> FitResult:
    """Weighted least squares of log(error) on log(x).

    Weights are 1/Var(log error) with Var(log e) ~ (se/e)^2; the half-width is
    1.96 times the slope's standard error computed from the weighted residual
    variance (inflated to at least 1 to stay honest on over-dispersed fits).
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least three points to fit a rate")
    if np.any(e <= 0.0):
        raise ValueError("degenerate level (zero/negative error); reported, not fitted")
    w = np.ones_like(e) if ses is None else (e / np.maximum(np.asarray(ses), 1e-300)) ** 2
    lx, le = np.log(x), np.log(e)
    X = np.column_stack([np.ones_like(lx), lx])
    W = np.diag(w)
    cov = np.linalg.inv(X.T @ W @ X)
    beta = cov @ (X.T @ W @ le)
    resid = le - X @ beta
    dof = max(len(x) - 2, 1)
    scale = max(float(resid @ (w * resid)) / dof, 1.0) if len(x) > 2 else 1.0
    half = 1.96 * math.sqrt(scale * cov[1, 1])
    return FitResult(rate=float(beta[1]), half_width=float(half), intercept=float(beta[0]))


def _offset_power_fit(x, values, s0: float) -> float:
    """Exponent of a power law with an additive floor, v ~ c1 * x**s - c2.

    Fit in linear space so the offset enters the model instead of biasing a
    log-log slope. ``s0`` seeds the exponent; the result is insensitive to it
    for the scales used here.
    """
    from scipy.optimize import curve_fit

    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    p0 = (v[-1] / x[-1] ** s0, s0, 0.0)
    popt, _ = curve_fit(lambda t, c1, s, c2: c1 * t**s - c2, x, v, p0=p0, maxfev=20000)
    return float(popt[1])


# ---------------------------------------------------------------------------
# reports


@dataclass
class ConvergenceReport:
    kind: str
    axis: str  # "h" or "N": the abscissa of the fit
    levels: list  # dict rows: level, h, k, N, error, se, samples
    fit: FitResult
    ratios: list  # pairwise log2(e_i / e_{i+1})
    config: dict
    extras: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def rate(self) -> float:
        return self.fit.rate

    def row_arrays(self):
        get = lambda key: np.array([row[key] for row in self.levels])
        return get("h"), get("k"), get("N"), get("error"), get("se")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "axis": self.axis,
            "levels": self.levels,
            "fit": self.fit.to_dict(),
            "ratios": self.ratios,
            "config": self.config,
            "config_digest": hashlib.sha256(
                json.dumps(self.config, sort_keys=True).encode()
            ).hexdigest()[:16],
            "extras": self.extras,
            "wall_time_s": self.wall_time,
            "backend": kernels.BACKEND,
            "version": _package_version(),
            "git_describe": _git_describe(),
        }

    def write_csv(self, path) -> None:
        """CSV (level,h,k,N,error,se,samples; LF endings, 17 significant digits)
        plus a JSON sidecar `<path minus extension>.meta.json` with the full config."""
        path = str(path)
        with open(path, "w", newline="\n") as fh:
            fh.write("level,h,k,N,error,se,samples\n")
            for row in self.levels:
                fh.write(
                    f"{row['level']},{row['h']:.17g},{row['k']:.17g},{row['N']},"
                    f"{row['error']:.17g},{row['se']:.17g},{row['samples']}\n"
                )
        sidecar = path[: path.rfind(".")] if "." in path.split("/")[-1] else path
        with open(sidecar + ".meta.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def summary(self) -> str:
        lines = [f"{self.kind} ({self.axis}-axis): rate {self.fit.rate:+.4f} +- {self.fit.half_width:.4f}"]
        for row in self.levels:
            lines.append(
                f"  level {row['level']}: h=1/{round(1/row['h'])} k={row['k']:.3e} N={row['N']}"
                f" error={row['error']:.6e} se={row['se']:.1e}"
            )
        if self.ratios:
            lines.append("  pairwise log2 ratios: " + ", ".join(f"{r:.3f}" for r in self.ratios))
        for key, val in self.extras.items():
            lines.append(f"  {key}: {val}")
        return "\n".join(lines)


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("roughspde")
    except Exception:
        return "unknown"


def _git_describe() -> str | None:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or None
    except Exception:
        return None


def _fit_or_flag(xs, rows, extras: dict) -> FitResult:
    """Fit the rows' moments, or mark the report degenerate instead of fitting."""
    try:
        return fit_rate(xs, [r["error"] for r in rows], [r["se"] for r in rows])
    except ValueError as exc:
        extras["degenerate"] = str(exc)
        return FitResult(rate=float("nan"), half_width=float("nan"), intercept=float("nan"))


def _flag_monotone(rows, axis: str, extras: dict) -> None:
    """Errors should shrink toward the finer end of the ladder; flag if not."""
    e = [r["error"] for r in rows]
    decreasing = all(a >= b for a, b in zip(e, e[1:]))
    extras["monotone_refinement"] = decreasing
    if not decreasing:
        extras["monotone_violation"] = "mean error not decreasing along the ladder"


def check_report(report: "ConvergenceReport") -> bool:
    """Per-kind tolerance policy used for CLI exit codes.

    WZ and FEM rates must land within +-0.1 of H; the spectral-truncation rates
    within +-0.15 of their targets. The target/tolerance pair is recorded in
    the report extras by each runner.
    """
    target = report.extras.get("target_rate")
    tol = report.extras.get("rate_tol", 0.1)
    if target is None or not math.isfinite(report.fit.rate):
        return False
    ok = abs(report.fit.rate - target) <= tol
    extra_ok = all(
        abs(report.extras[key] - report.extras[t_key]) <= report.extras.get(w_key, tol)
        for key, t_key, w_key in (("h1_exponent", "h1_target", "h1_tol"),)
        if key in report.extras
    )
    return bool(ok and extra_ok)


def _moment_rows(errs: np.ndarray, p: int, meta_rows) -> list:
    """Per-level moment estimates from the (samples, levels) error matrix."""
    rows = []
    S = errs.shape[0]
    for ell, meta in enumerate(meta_rows):
        xp = errs[:, ell] ** p
        mean = float(np.mean(xp))
        se_xp = float(np.std(xp, ddof=1) / math.sqrt(S))
        est = mean ** (1.0 / p)
        se = se_xp / p * mean ** (1.0 / p - 1.0) if mean > 0 else 0.0
        rows.append(dict(meta, error=est, se=se, samples=S))
    return rows


def _run_samples(fn, n_samples: int, threads: int, width: int) -> np.ndarray:
    """Evaluate fn(sample_id) -> vector for all samples, in order, optionally threaded."""
    out = np.empty((n_samples, width))
    if threads <= 1:
        for s in range(n_samples):
            out[s] = fn(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for s, res in enumerate(ex.map(fn, range(n_samples))):
                out[s] = res
    return out


# ---------------------------------------------------------------------------
# coupled Wong-Zakai convergence (she-wz, swe-wz)


def run_wz_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Strong error between coupled noise-grid levels and the finest (reference) level.

    One fine draw per sample, aggregated exactly to every coarser grid; all
    levels are solved spectrally with the same mode count, so the L^2 error at
    the evaluation time is the Parseval norm of the coefficient difference.
    """
    if config.kind not in ("she-wz", "swe-wz"):
        raise ValueError("run_wz_convergence expects kind she-wz or swe-wz")
    t0 = time.perf_counter()
    ladder = config.ladder()
    grids = list(ladder)
    fine = grids[-1]
    cov = spatial_covariance(fine.n, config.H)
    wave = config.kind == "swe-wz"
    segments = _segments(grids, config)

    def one_sample(s: int) -> np.ndarray:
        ci = sample_cell_increments(fine, config.H, config.seed, sample_id=s, cov=cov)
        coeffs = []
        for g in grids:
            agg = ci if g is fine else aggregate(ci, g)
            if s == 0 and g is not fine:  # coupling invariant: exact re-summation
                blocks = ci.values.reshape(g.m, fine.m // g.m, g.n, fine.n // g.n)
                assert np.array_equal(agg.values, blocks.sum(axis=(1, 3)))
            state = _solve_to(config, regularize(agg), wave, segments[g.m])
            coeffs.append(state)
        ref = coeffs[-1]
        return np.array([np.linalg.norm(c - ref) for c in coeffs[:-1]])

    errs = _run_samples(one_sample, config.samples, config.threads, len(grids) - 1)
    meta = [
        dict(level=ell, h=g.h, k=g.k, N=config.n_modes)
        for ell, g in enumerate(grids[:-1])
    ]
    rows = _moment_rows(errs, config.p, meta)
    ratios = _pairwise_ratios(rows)
    extras = {
        "reference": dict(h=fine.h, k=fine.k, N=config.n_modes),
        "error_time": config.error_time,
        "target_rate": config.H,
        "rate_tol": 0.1,
    }
    fit = _fit_or_flag([r["h"] for r in rows], rows, extras)
    _flag_monotone(rows, "h", extras)
    return ConvergenceReport(
        kind=config.kind,
        axis="h",
        levels=rows,
        fit=fit,
        ratios=ratios,
        config=config.to_dict(),
        extras=extras,
        wall_time=time.perf_counter() - t0,
    )


def _segments(grids, config) -> dict:
    """Slab index of the evaluation time per grid size m (chain is cut there)."""
    out = {}
    for g in grids:
        idx = g.m if config.eval_time is None else int(round(config.eval_time / g.k))
        if abs(idx * g.k - config.error_time) > 1e-9 * config.T or idx < 1:
            raise ValueError("eval_time must be a slab edge of every level")
        out[g.m] = idx
    return out


def _solve_to(config: ExperimentConfig, xi, wave: bool, upto: int) -> np.ndarray:
    """Final displacement coefficients at slab edge `upto` (sub-grid of the noise grid)."""
    g = xi.grid
    sub = Grid(T=upto * g.k, m=upto, n=g.n) if upto != g.m else g
    if upto != g.m:
        xi = type(xi)(grid=sub, H=xi.H, values=xi.values[:upto])
    if wave:
        st = solve_swe_spectral(
            xi, config.u0, config.v0, config.drift, config.n_modes,
            substeps=config.substeps_spectral,
        )
        return st.coeffs
    st = solve_she_spectral(
        xi, config.u0, config.drift, config.n_modes, substeps=config.substeps_spectral
    )
    return st.coeffs


def _pairwise_ratios(rows) -> list:
    return [
        float(np.log2(a["error"] / b["error"]))
        for a, b in zip(rows, rows[1:])
        if a["error"] > 0 and b["error"] > 0
    ]


# ---------------------------------------------------------------------------
# FEM vs spectral on identical noise (she-fem)


def run_fem_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """||u~ - u~_h||_{L^2} at the evaluation time, per level, FEM vs spectral on one xi~.

    The per-level noise grid is the FEM mesh; the reference is the spectral
    solve (ref_mult x finest-n modes) of the same regularized equation.
    """
    if config.kind != "she-fem":
        raise ValueError("run_fem_convergence expects kind she-fem")
    t0 = time.perf_counter()
    ladder = make_ladder(config.T, list(config.n_levels), config.coupling)
    grids = list(ladder)
    n_ref_modes = config.ref_mult * grids[-1].n
    covs = {g.n: spatial_covariance(g.n, config.H) for g in grids}
    L = len(grids)

    def one_sample(s: int) -> np.ndarray:
        out = np.empty(L)
        for ell, g in enumerate(grids):
            ci = sample_cell_increments(
                g, config.H, config.seed, sample_id=s * L + ell, cov=covs[g.n]
            )
            xi = regularize(ci)
            fem = solve_she_fem(xi, config.u0, config.drift, substeps=config.substeps)
            ref = solve_she_spectral(
                xi, config.u0, config.drift, n_ref_modes,
                substeps=config.substeps_spectral,
            )
            out[ell] = l2_error(ref, fem)
        return out

    errs = _run_samples(one_sample, config.samples, config.threads, L)
    meta = [dict(level=ell, h=g.h, k=g.k, N=n_ref_modes) for ell, g in enumerate(grids)]
    rows = _moment_rows(errs, config.p, meta)
    extras = {
        "error_time": config.error_time,
        "target_rate": config.H,
        "rate_tol": 0.1,
        # theoretical exponent under k=h^2: min(H, 1/2 - eps), eps reported only
        "theory_exponent": min(config.H, 0.5 - config.epsilon),
        "epsilon": config.epsilon,
        "fem_substeps": config.substeps,
    }
    fit = _fit_or_flag([r["h"] for r in rows], rows, extras)
    _flag_monotone(rows, "h", extras)
    return ConvergenceReport(
        kind=config.kind,
        axis="h",
        levels=rows,
        fit=fit,
        ratios=_pairwise_ratios(rows),
        config=config.to_dict(),
        extras=extras,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# spectral Galerkin truncation study (swe-spectral)


def run_spectral_convergence(config: ExperimentConfig):
    """Two reports: error vs N at fixed h (target -1) and vs h at fixed N (target H-1).

    The N-axis study uses the configured initial data (an H^1 power law by
    default) so the projection tail exercises the data term; the h-axis study
    runs with zero data, fixed N, fixed k = h_study_T over a single slab, and
    a very short horizon. The short horizon matters: once waves disperse
    (t >> h), the L^2 truncation tail saturates at its continuum value and has
    no h-power law at all -- the h^{H-1} factor of the error bound is tight
    exactly while the grid-cutoff modes still carry their H^1 mass, i.e. for
    sqrt(lambda_cutoff) * t <~ 1, which is where this study sits.
    """
    if config.kind != "swe-spectral":
        raise ValueError("run_spectral_convergence expects kind swe-spectral")
    if not config.drift.is_zero:
        raise NotImplementedError(
            "the truncation study is defined for zero drift; nonzero drift couples "
            "modes and needs per-N solves"
        )
    return _spectral_n_study_linear(config), _spectral_h_study_linear(config)


def _wave_solve_coeffs(config, xi, n_modes):
    st = solve_swe_spectral(
        xi, config.u0, config.v0, config.drift, n_modes, substeps=config.substeps_spectral
    )
    return st


def _spectral_n_study_linear(config) -> ConvergenceReport:
    t0 = time.perf_counter()
    n = config.n_fixed
    m = round(config.T * n) if config.coupling == "k=h" else round(config.T * n * n)
    grid = make_grid(config.T, m, n)
    n_ref = config.ref_mult * max(config.N_levels)
    cov = spatial_covariance(n, config.H)
    Ns = list(config.N_levels)

    def one_sample(s: int) -> np.ndarray:
        ci = sample_cell_increments(grid, config.H, config.seed, sample_id=s, cov=cov)
        st = _wave_solve_coeffs(config, regularize(ci), n_ref)
        c2 = st.coeffs**2
        # zero drift: the N-mode solution is the truncation of the reference
        return np.sqrt(np.array([c2[N:].sum() for N in Ns]))

    errs = _run_samples(one_sample, config.samples, config.threads, len(Ns))
    meta = [dict(level=ell, h=grid.h, k=grid.k, N=N) for ell, N in enumerate(Ns)]
    rows = _moment_rows(errs, config.p, meta)
    extras = {
        "reference_modes": n_ref,
        "error_time": config.error_time,
        "target_rate": -1.0,
        "rate_tol": 0.15,
    }
    fit = _fit_or_flag([r["N"] for r in rows], rows, extras)
    _flag_monotone(rows, "N", extras)
    return ConvergenceReport(
        kind=config.kind,
        axis="N",
        levels=rows,
        fit=fit,
        ratios=_pairwise_ratios(rows),
        config=config.to_dict(),
        extras=extras,
        wall_time=time.perf_counter() - t0,
    )


def _spectral_h_study_linear(config) -> ConvergenceReport:
    t0 = time.perf_counter()
    if config.h_study_T is not None:
        grids = [make_grid(config.h_study_T, 1, n) for n in config.h_levels]
        t_eval = config.h_study_T
    else:
        grids = list(make_ladder(config.T, list(config.h_levels), config.coupling))
        t_eval = config.error_time
    N = config.N_fixed
    n_ref = config.ref_mult * max(config.N_levels)
    covs = {g.n: spatial_covariance(g.n, config.H) for g in grids}
    cfg0 = replace(config, u0=InitialData.zero(), v0=InitialData.zero())
    L = len(grids)

    def one_sample(s: int) -> np.ndarray:
        out = np.empty(L)
        for ell, g in enumerate(grids):
            ci = sample_cell_increments(
                g, config.H, config.seed, sample_id=s * L + ell, cov=covs[g.n]
            )
            st = _wave_solve_coeffs(cfg0, regularize(ci), n_ref)
            out[ell] = math.sqrt(float(st.coeffs[N:] @ st.coeffs[N:]))
        return out

    errs = _run_samples(one_sample, config.samples, config.threads, L)
    meta = [dict(level=ell, h=g.h, k=g.k, N=N) for ell, g in enumerate(grids)]
    rows = _moment_rows(errs, config.p, meta)
    extras = {
        "reference_modes": n_ref,
        "error_time": t_eval,
        "target_rate": config.H - 1.0,
        "rate_tol": 0.15,
        "regime": "pre-dispersion (k fixed = horizon, single slab)"
        if config.h_study_T is not None
        else f"coupled ladder ({config.coupling})",
        "initial_data": "zero (data adds no h-dependence; noise exponent is the target)",
    }
    fit = _fit_or_flag([r["h"] for r in rows], rows, extras)
    # errors grow as h -> 0 here (the bound diverges); monotonicity not expected
    return ConvergenceReport(
        kind=config.kind,
        axis="h",
        levels=rows,
        fit=fit,
        ratios=_pairwise_ratios(rows),
        config=config.to_dict(),
        extras=extras,
        wall_time=time.perf_counter() - t0,
    )


def run_h1_scaling(config: ExperimentConfig) -> ConvergenceReport:
    """Fitted exponent of (E ||u~||_1^2)^{1/2} vs h (target H - 1), zero data.

    The H^1 norm of the regularized wave solution diverges as the noise grid
    refines; the reference mode count is 8x the finest resolution so the
    grid-cutoff modes (where the H^1 mass concentrates) stay inside the sum.
    """
    t0 = time.perf_counter()
    grids = list(make_ladder(config.T, list(config.n_levels), config.coupling))
    n_ref = 8 * max(config.n_levels)
    covs = {g.n: spatial_covariance(g.n, config.H) for g in grids}
    cfg0 = replace(config, u0=InitialData.zero(), v0=InitialData.zero())
    L = len(grids)

    def one_sample(s: int) -> np.ndarray:
        out = np.empty(L)
        for ell, g in enumerate(grids):
            ci = sample_cell_increments(
                g, config.H, config.seed, sample_id=s * L + ell, cov=covs[g.n]
            )
            st = _wave_solve_coeffs(cfg0, regularize(ci), n_ref)
            out[ell] = h1_norm(st)
        return out

    vals = _run_samples(one_sample, config.samples, config.threads, L)
    meta = [dict(level=ell, h=g.h, k=g.k, N=n_ref) for ell, g in enumerate(grids)]
    rows = _moment_rows(vals, 2, meta)
    extras = {
        "quantity": "(E ||u~(T)||_1^2)^{1/2}",
        "error_time": config.error_time,
        "target_rate": config.H - 1.0,
        "rate_tol": 0.15,
    }
    fit = _fit_or_flag([r["h"] for r in rows], rows, extras)
    return ConvergenceReport(
        kind=config.kind,
        axis="h",
        levels=rows,
        fit=fit,
        ratios=_pairwise_ratios(rows),
        config=config.to_dict(),
        extras=extras,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# exact second moments (independent validation route, zero drift only)


def exact_mode_second_moments(kind: str, H: float, grid: Grid, n_modes: int, t: float) -> np.ndarray:
    """E[u_alpha(t)^2] for the zero-data, zero-drift solution driven by xi~ on `grid`.

    u_alpha(t) = sum_i xi_hat_{alpha,i} int_{I_i} kernel(t-s) ds with
    Var(xi_hat_{alpha,i}) = (c_alpha^T Q c_alpha)/(k h^2), so
    E[u_alpha^2] = (c^T Q c)/(k h^2) * sum_i W_i^2, exactly.
    """
    alphas = np.arange(1, n_modes + 1)
    C = basis.cell_integral_matrix(grid.n, alphas)  # (n, N)
    Q = spatial_covariance(grid.n, H).Q
    quad = np.einsum("ja,jl,la->a", C, Q, C)
    edges = grid.time_edges()
    idx = int(round(t / grid.k))
    W = basis.kernel_time_integral(
        kind, alphas[None, :], edges[:idx, None], edges[1 : idx + 1, None], t
    )
    w2 = (W * W).sum(axis=0)
    return quad / (grid.k * grid.h**2) * w2


def exact_coupled_error_sq(
    kind: str, H: float, coarse: Grid, fine: Grid, n_modes: int, t: float
) -> float:
    """Exact E ||u~_coarse - u~_fine||^2 at t for the coupled (aggregated) noise pair.

    Both solutions are linear images of the fine increments; per mode the
    difference variance needs only three spatial quadratic forms and three
    time-weight cross sums.
    """
    if not fine.refines(coarse):
        raise ValueError("grids must nest")
    alphas = np.arange(1, n_modes + 1)
    Qf = spatial_covariance(fine.n, H).Q
    Cf = basis.cell_integral_matrix(fine.n, alphas)
    Cc = basis.cell_integral_matrix(coarse.n, alphas)
    # coarse cell integrals expanded to fine cells (piecewise-constant weights)
    Cc_f = np.repeat(Cc, fine.n // coarse.n, axis=0)
    A_cc = np.einsum("ja,jl,la->a", Cc_f, Qf, Cc_f)
    A_ff = np.einsum("ja,jl,la->a", Cf, Qf, Cf)
    A_cf = np.einsum("ja,jl,la->a", Cc_f, Qf, Cf)
    idx_f = int(round(t / fine.k))
    idx_c = int(round(t / coarse.k))
    if abs(idx_f * fine.k - t) > 1e-9 or abs(idx_c * coarse.k - t) > 1e-9:
        raise ValueError("t must be a slab edge of both grids")
    ef = fine.time_edges()
    ec = coarse.time_edges()
    Wf = basis.kernel_time_integral(kind, alphas[None, :], ef[:idx_f, None], ef[1 : idx_f + 1, None], t)
    Wc = basis.kernel_time_integral(kind, alphas[None, :], ec[:idx_c, None], ec[1 : idx_c + 1, None], t)
    Wc_f = np.repeat(Wc, fine.m // coarse.m, axis=0)  # (fine slabs, N)
    S_cc = (Wc_f * Wc_f).sum(axis=0)
    S_ff = (Wf * Wf).sum(axis=0)
    S_cf = (Wc_f * Wf).sum(axis=0)
    sc = 1.0 / (coarse.k * coarse.h)
    sf = 1.0 / (fine.k * fine.h)
    per_mode = (
        sc * sc * A_cc * S_cc + sf * sf * A_ff * S_ff - 2.0 * sc * sf * A_cf * S_cf
    ) * fine.k
    return float(per_mode.sum())


# ---------------------------------------------------------------------------
# noise / lemma / norm-scaling check suites


def run_noise_checks(config: ExperimentConfig) -> dict:
    """Isometry oracle equivalence, sampler statistics, aggregation additivity.

    Returns a dict of named checks, each with measured numbers and a `passed`
    flag; `passed` overall is the conjunction.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    results: dict = {}

    # closed-form isometry vs increment-covariance quadratic form
    worst = 0.0
    cases = 0
    for H in (0.1, 0.25, 0.4, 0.5):
        for _ in range(13 if H != 0.5 else 11):
            m = int(rng.integers(1, 9))
            n = int(rng.integers(2, 17))
            grid = make_grid(float(rng.choice([0.5, 1.0, 2.0])), m, n)
            f = StepFunction2D(grid, rng.standard_normal((m, n)))
            a = ito_isometry_variance(f, H=H)
            b = increment_covariance_form(f, H=H)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
            cases += 1
    results["isometry_equivalence"] = {
        "cases": cases,
        "max_rel_diff": worst,
        "tol": 1e-8,
        "passed": bool(worst <= 1e-8),
    }

    # sampler statistics on (H, n, m) = (0.3, 8, 4)
    H, n, m = 0.3, 8, 4
    grid = make_grid(1.0, m, n)
    cov = spatial_covariance(n, H)
    S = config.samples
    draws = np.empty((S, m, n))
    for s in range(S):
        draws[s] = sample_cell_increments(grid, H, config.seed, sample_id=s, cov=cov).values
    rows = draws.reshape(S * m, n)
    target = grid.k * cov.Q
    emp = rows.T @ rows / rows.shape[0]
    se = np.sqrt(
        (np.outer(np.diag(target), np.diag(target)) + target**2) / rows.shape[0]
    )
    zmat = (emp - target) / se
    max_z = float(np.abs(zmat).max())
    offdiag_sign = bool(emp[0, 1] < 0.0 and target[0, 1] < 0.0)
    kurt = _excess_kurtosis(rows)
    results["sampler_covariance"] = {
        "samples": S,
        "max_z": max_z,
        "tol_z": 3.0,
        "offdiagonal_negative": offdiag_sign,
        "max_excess_kurtosis": float(np.abs(kurt).max()),
        "tol_kurtosis": 0.05,
        "passed": bool(max_z <= 3.0 and offdiag_sign and np.abs(kurt).max() <= 0.05),
    }

    # MC isometry on random step functions
    zscores = []
    for i in range(10):
        f = StepFunction2D(grid, rng.standard_normal((m, n)))
        _, _, z = sampler_isometry_check(f, H, S, config.seed + 1 + i)
        zscores.append(abs(z))
    results["sampler_isometry"] = {
        "functions": 10,
        "max_abs_z": float(max(zscores)),
        "tol": 3.0,
        "passed": bool(max(zscores) <= 3.0),
    }

    # aggregation: bit-exact block sums and exact covariance additivity
    fine = make_grid(1.0, 8, 16)
    coarse = make_grid(1.0, 4, 4)
    ci = sample_cell_increments(fine, H, config.seed, sample_id=7)
    agg = aggregate(ci, coarse)
    manual = ci.values.reshape(4, 2, 4, 4).sum(axis=(1, 3))
    exact_sum = bool(np.array_equal(agg.values, manual))
    Qf = spatial_covariance(16, H).Q
    Qc = spatial_covariance(4, H).Q
    P = np.kron(np.eye(4), np.ones(4))  # block-sum map
    cov_gap = float(np.abs(P @ Qf @ P.T - Qc).max())
    results["aggregation"] = {
        "block_sums_exact": exact_sum,
        "covariance_additivity_gap": cov_gap,
        "tol": 1e-12,
        "passed": bool(exact_sum and cov_gap <= 1e-12),
    }

    results["passed"] = all(v["passed"] for k, v in results.items() if isinstance(v, dict))
    results["wall_time_s"] = time.perf_counter() - t0
    return results


def _excess_kurtosis(rows: np.ndarray) -> np.ndarray:
    c = rows - rows.mean(axis=0)
    m2 = (c**2).mean(axis=0)
    m4 = (c**4).mean(axis=0)
    return m4 / m2**2 - 3.0


def run_lemma_checks(config: ExperimentConfig) -> dict:
    """Numerical checks of the eigenfunction regularity lemmas and the kernel sums."""
    t0 = time.perf_counter()
    results: dict = {}

    # sine sum at kappa = 1: proof bound 8/pi, exact limit d(1 - d)
    pts = np.linspace(0.0, 1.0, 34)[1:-1]
    Y, Z = np.meshgrid(pts, pts, indexing="ij")
    mask = np.abs(Y - Z) > 1e-12
    n_modes = 10_000
    vals = basis.lemma_sin_sum(Y[mask], Z[mask], kappa=1.0, n_modes=n_modes)
    d = np.abs(Y[mask] - Z[mask])
    ratio = vals / d
    exact_gap = float(np.abs(vals - d * (1.0 - d)).max())
    bound = 8.0 / math.pi * 1.02
    results["sin_sum"] = {
        "lattice": "32x32",
        "modes": n_modes,
        "max_ratio": float(ratio.max()),
        "bound": bound,
        "max_gap_to_exact": exact_gap,
        "exact_tail_allowance": 8.0 / (math.pi**2 * n_modes),
        "passed": bool(
            ratio.max() <= bound and exact_gap <= 8.0 / (math.pi**2 * n_modes) + 1e-12
        ),
    }

    # singular Sobolev integral: growth exponent 1/2 - H and explicit bound.
    # The value behaves like c1 * lambda^(1/2-H) - c2(lambda) with a lower-order
    # offset that decays only like lambda^{H-1/2}; near H = 1/2 no feasible mode
    # range makes a plain log-log fit reach the asymptotic slope (at H = 0.4 the
    # value is still 39% below its asymptote at alpha = 64). The exponent is
    # therefore estimated with the offset in the model -- the same
    # rate-with-floor fit used for convergence orders -- and the plain
    # tail-window slope is reported alongside as a diagnostic.
    sob = {}
    ok = True
    for H in (0.1, 0.25, 0.4):
        alphas = np.arange(1, 65)
        vals = np.array([basis.lemma_sobolev_integral(int(a), H) for a in alphas])
        lam = basis.eigenvalue(alphas)
        slope = _offset_power_fit(lam, vals, 0.5 - H)
        tail = fit_rate(lam[15:], vals[15:])
        explicit = 4.0 * lam ** (0.5 - H) * (1.0 + 4.0 / (1.0 - 2.0 * H))
        bound_ok = bool(np.all(vals <= explicit))
        slope_ok = bool(abs(slope - (0.5 - H)) <= 0.05)
        sob[f"H={H}"] = {
            "slope": slope,
            "target": 0.5 - H,
            "slope_tol": 0.05,
            "tail_window_slope": tail.rate,
            "explicit_bound_ok": bound_ok,
            "passed": slope_ok and bound_ok,
        }
        ok = ok and slope_ok and bound_ok
    sob["passed"] = ok
    results["sobolev_integral"] = sob

    # kernel sums (iii): bounded over a lattice, monotone in the truncation
    ksum = {}
    pts = np.linspace(0.1, 0.9, 9)
    Y, Z = np.meshgrid(pts, pts, indexing="ij")
    mask = np.abs(Y - Z) > 1e-12
    d = np.abs(Y[mask] - Z[mask])
    for kind in (HEAT, WAVE):
        r_half = basis.lemma_kernel_sum(kind, Y[mask], Z[mask], t=1.0, n_modes=10_000) / d
        r_full = basis.lemma_kernel_sum(kind, Y[mask], Z[mask], t=1.0, n_modes=20_000) / d
        monotone = bool(np.all(r_full >= r_half - 1e-12))
        stable = float(np.max(r_full - r_half) / np.max(r_full))
        ksum[kind] = {
            "fitted_C": float(r_full.max()),
            "monotone_in_N": monotone,
            "relative_tail": stable,
            "passed": bool(monotone and stable < 0.01),
        }
    ksum["passed"] = ksum[HEAT]["passed"] and ksum[WAVE]["passed"]
    results["kernel_sum"] = ksum

    # Psi/Upsilon slab sums: slopes vs k
    pu = {}
    ok = True
    T = config.T
    ms = (16, 32, 64, 128)
    targets = {HEAT: (2.5, 1.5), WAVE: (3.0, 2.0)}
    floors = {HEAT: (2.4, 1.4), WAVE: (2.9, 1.9)}
    for kind in (HEAT, WAVE):
        psis, upss, ks = [], [], []
        for m in ms:
            grid = make_grid(T, m, 8)
            psi, ups = basis.psi_upsilon_mode_sums(kind, T, grid, n_modes=20_000)
            psis.append(psi)
            upss.append(ups)
            ks.append(grid.k)
        fpsi = fit_rate(ks, psis)
        fups = fit_rate(ks, upss)
        tpsi, tups = targets[kind]
        fl_psi, fl_ups = floors[kind]
        good = bool(
            fpsi.rate >= fl_psi
            and fups.rate >= fl_ups
            and abs(fpsi.rate - tpsi) <= 0.1
            and abs(fups.rate - tups) <= 0.1
        )
        pu[kind] = {
            "psi_slope": fpsi.rate,
            "psi_target": tpsi,
            "upsilon_slope": fups.rate,
            "upsilon_target": tups,
            "floors": [fl_psi, fl_ups],
            "psi_values": psis,
            "upsilon_values": upss,
            "passed": good,
        }
        ok = ok and good
    pu["passed"] = ok
    results["psi_upsilon"] = pu

    results["passed"] = all(
        v["passed"] for v in results.values() if isinstance(v, dict)
    )
    results["wall_time_s"] = time.perf_counter() - t0
    return results


def run_norm_scaling(config: ExperimentConfig) -> dict:
    """Measured growth exponents of E||xi~(t)||^2 vs the exact h^{2H-2}/k law.

    Sweeps h at fixed k and k at fixed h; flags the disagreement with the
    literature form (k^{-1/2} h^{-1/2} per norm) whenever H < 1/2.
    """
    t0 = time.perf_counter()
    from .wz import l2_norm_scaling_study

    H = config.H
    S = config.samples
    h_grids = [make_grid(1.0, 8, n) for n in (8, 16, 32, 64)]
    k_grids = [make_grid(1.0, m, 8) for m in (8, 16, 32, 64)]
    h_rows = l2_norm_scaling_study(H, h_grids, S, config.seed)
    k_rows = l2_norm_scaling_study(H, k_grids, S, config.seed + 1)
    fh = fit_rate([r["h"] for r in h_rows], [r["measured"] for r in h_rows], [r["se"] for r in h_rows])
    fk = fit_rate([r["k"] for r in k_rows], [r["measured"] for r in k_rows], [r["se"] for r in k_rows])
    closed_ok = all(
        abs(r["measured"] - r["closed_form"]) <= 4.0 * r["se"] for r in h_rows + k_rows
    )
    e_h_target = 2.0 * H - 2.0
    passed = bool(
        abs(fh.rate - e_h_target) <= 0.05 and abs(fk.rate - (-1.0)) <= 0.05 and closed_ok
    )
    out = {
        "e_h": fh.rate,
        "e_h_target": e_h_target,
        "e_k": fk.rate,
        "e_k_target": -1.0,
        "tol": 0.05,
        "closed_form": "E||xi~(t)||^2 = h^(2H-2)/k",
        "closed_form_within_4se": closed_ok,
        "h_rows": h_rows,
        "k_rows": k_rows,
        "samples": S,
        "passed": passed,
        "wall_time_s": time.perf_counter() - t0,
    }
    if H < 0.5:
        out["paper_form_flag"] = (
            "measured per-norm h-exponent is H-1, not the -1/2 suggested by the "
            "k^{-1/2} h^{-1/2} moment-bound form; the exact second moment is "
            "h^{2H-2}/k"
        )
    return out
