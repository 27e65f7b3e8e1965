"""Problem data shared by the solvers: drift specifications and initial data.

Both are declarative little records so experiment configs can round-trip
through JSON and solvers can pick exact fast paths (zero and affine drifts
have exact modal projections; registry drifts go through oversampled DST
quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DriftSpec", "InitialData", "DRIFT_REGISTRY"]

# name -> (callable, Lipschitz constant); bounded Lipschitz nonlinearities only
DRIFT_REGISTRY = {
    "sin": (np.sin, 1.0),
    "tanh": (np.tanh, 1.0),
}


@dataclass(frozen=True)
class DriftSpec:
    """Reaction term b(u): zero, affine a*u + c, or a named registry function."""

    kind: str = "zero"
    a: float = 0.0
    c: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("zero", "affine", "registry"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "registry" and self.name not in DRIFT_REGISTRY:
            raise ValueError(
                f"unknown drift {self.name!r}; registered: {sorted(DRIFT_REGISTRY)}"
            )

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls(kind="zero")

    @classmethod
    def affine(cls, a: float, c: float) -> "DriftSpec":
        return cls(kind="affine", a=float(a), c=float(c))

    @classmethod
    def named(cls, name: str) -> "DriftSpec":
        return cls(kind="registry", name=name)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def lipschitz(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "affine":
            return abs(self.a)
        return DRIFT_REGISTRY[self.name][1]

    def __call__(self, u):
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "affine":
            return self.a * np.asarray(u) + self.c
        return DRIFT_REGISTRY[self.name][0](u)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "affine":
            d.update(a=self.a, c=self.c)
        elif self.kind == "registry":
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "DriftSpec":
        if not d:
            return cls.zero()
        return cls(
            kind=d.get("kind", "zero"),
            a=float(d.get("a", 0.0)),
            c=float(d.get("c", 0.0)),
            name=d.get("name", ""),
        )


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial value given in the Dirichlet sine basis.

    Forms: zero; a single mode (amplitude on mode alpha); an explicit
    coefficient list; or a power law amplitude * alpha^exponent (a convenience
    expansion of the coefficient-list form, handy for data of prescribed
    Sobolev regularity).
    """

    kind: str = "zero"
    mode: int = 1
    amplitude: float = 0.0
    exponent: float = 0.0
    coeffs: np.ndarray | None = None
    synth_modes: int = 2048  # pointwise-evaluation cutoff for the power-law form

    def __post_init__(self):
        if self.kind not in ("zero", "mode", "coeffs", "powerlaw"):
            raise ValueError(f"unknown initial-data kind {self.kind!r}")
        if self.kind == "coeffs" and self.coeffs is None:
            raise ValueError("coefficient form needs coeffs")
        if self.kind == "mode" and self.mode < 1:
            raise ValueError("mode index starts at 1")

    @classmethod
    def zero(cls) -> "InitialData":
        return cls(kind="zero")

    @classmethod
    def single_mode(cls, mode: int, amplitude: float = 1.0) -> "InitialData":
        return cls(kind="mode", mode=int(mode), amplitude=float(amplitude))

    @classmethod
    def from_coeffs(cls, coeffs) -> "InitialData":
        return cls(kind="coeffs", coeffs=np.asarray(coeffs, dtype=float))

    @classmethod
    def powerlaw(cls, amplitude: float, exponent: float) -> "InitialData":
        return cls(kind="powerlaw", amplitude=float(amplitude), exponent=float(exponent))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def coefficients(self, n_modes: int) -> np.ndarray:
        """First n_modes sine coefficients (the Galerkin projection of the data)."""
        out = np.zeros(n_modes)
        if self.kind == "mode":
            if self.mode <= n_modes:
                out[self.mode - 1] = self.amplitude
        elif self.kind == "coeffs":
            take = min(n_modes, len(self.coeffs))
            out[:take] = self.coeffs[:take]
        elif self.kind == "powerlaw":
            a = np.arange(1, n_modes + 1, dtype=float)
            out = self.amplitude * a**self.exponent
        return out

    def __call__(self, x):
        """Pointwise synthesis (used by the FEM projection)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        n = self.synth_modes if self.kind == "powerlaw" else (
            self.mode if self.kind == "mode" else len(self.coeffs)
        )
        c = self.coefficients(n)
        a = np.arange(1, n + 1, dtype=float)
        return np.sqrt(2.0) * np.sin(np.multiply.outer(x, a * np.pi)) @ c

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "mode":
            d.update(mode=self.mode, amplitude=self.amplitude)
        elif self.kind == "coeffs":
            d["coeffs"] = [float(v) for v in self.coeffs]
        elif self.kind == "powerlaw":
            d.update(amplitude=self.amplitude, exponent=self.exponent)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "InitialData":
        if not d:
            return cls.zero()
        kind = d.get("kind", "zero")
        if kind == "coeffs":
            return cls.from_coeffs(d["coeffs"])
        return cls(
            kind=kind,
            mode=int(d.get("mode", 1)),
            amplitude=float(d.get("amplitude", 0.0)),
            exponent=float(d.get("exponent", 0.0)),
        )
