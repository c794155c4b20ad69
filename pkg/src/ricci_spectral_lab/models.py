"""Closed-form Ricci flow solutions with analytic curvature and spectrum.

Every family here is a product of Einstein blocks, each evolving by a pure
rescaling ``g_b(t) = s_b(t) g_b(0)``.  A block of dimension ``d`` whose Ricci
tensor is ``rho * g`` gives ``s' = -2 rho s``; scalar curvature, Einstein
tensor, volume and inverse-metric rates all follow from the block list.

Mode indices are 0-based positions in the ladder of nonzero eigenvalues
(mode 0 is the first nonzero eigenvalue).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import TimeOutOfRange, UnknownSpectrum

__all__ = [
    "Block",
    "EinsteinBounds",
    "ModelGeometry",
    "RoundSphere",
    "HyperbolicScaled",
    "FlatTorus",
    "SphereCircleProduct",
    "FAMILIES",
    "maximal_time",
    "model_scalar_curvature",
    "model_einstein_bounds",
    "model_eigenvalue",
    "model_rate_prediction",
]


class Block(NamedTuple):
    dim: int
    scale: float  # s_b(t), with g_b(t) = s_b(t) g_b(0)
    ricci: float  # rho_b(t), with Ric restricted to the block = rho_b g_b(t)


class EinsteinBounds(NamedTuple):
    """Extreme eigenvalues of ``g^{-1} E`` (units 1/length^2)."""

    lambda_min: float
    lambda_max: float


class ModelGeometry:
    """Base class: subclasses provide ``blocks``, ``maximal_time`` and the spectrum."""

    family = "ModelGeometry"
    dim = 0

    def maximal_time(self):
        return math.inf

    def check_time(self, t):
        T = self.maximal_time()
        if not (0.0 <= t < T):
            raise TimeOutOfRange(f"{self.family}: t={t!r} outside [0, {T})")
        return float(t)

    def blocks(self, t):
        raise NotImplementedError

    def lengths(self, t):
        """Named length parameters of the metric at time ``t``."""
        raise NotImplementedError

    def scalar_curvature(self, t):
        return sum(b.dim * b.ricci for b in self.blocks(self.check_time(t)))

    def einstein_bounds(self, t):
        R = self.scalar_curvature(t)
        e = [b.ricci - R / 2 for b in self.blocks(t)]
        return EinsteinBounds(min(e), max(e))

    def volume_factor(self, t):
        """``vol(g(t)) / vol(g(0))``."""
        return math.prod(b.scale ** (b.dim / 2) for b in self.blocks(self.check_time(t)))

    def eigenvalue(self, mode, t):
        raise NotImplementedError

    def einstein_term(self, mode, t):
        """``int E_ij f^i f^j dv`` for the normalized eigenfunction of ``mode``."""
        raise NotImplementedError

    def laplacian_variation_rate(self, mode, t):
        """``kappa`` with ``2 R^ij f_ij = -kappa f`` for the eigenfunction of ``mode``."""
        raise NotImplementedError

    def rate_prediction(self, mode, t):
        mu = self.eigenvalue(mode, t)
        return mu * self.scalar_curvature(t) + 2.0 * self.einstein_term(mode, t)

    def scaled(self, s):
        """Same family with every initial length multiplied by ``s``."""
        raise NotImplementedError


def _check_mode(mode):
    if isinstance(mode, bool) or int(mode) != mode or mode < 0:
        raise ValueError(f"mode must be a nonnegative integer, got {mode!r}")
    return int(mode)


@dataclass(frozen=True)
class RoundSphere(ModelGeometry):
    dim: int = 2
    r0: float = 1.0
    family = "RoundSphere"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("RoundSphere needs dim >= 2")
        if not self.r0 > 0:
            raise ValueError("RoundSphere needs r0 > 0")

    def maximal_time(self):
        return self.r0**2 / (2 * (self.dim - 1))

    def radius_sq(self, t):
        return self.r0**2 - 2 * (self.dim - 1) * self.check_time(t)

    def blocks(self, t):
        r2 = self.radius_sq(t)
        return [Block(self.dim, r2 / self.r0**2, (self.dim - 1) / r2)]

    def lengths(self, t):
        return {"r": math.sqrt(self.radius_sq(t))}

    def scalar_curvature(self, t):
        n = self.dim
        return n * (n - 1) / self.radius_sq(t)

    def eigenvalue(self, mode, t):
        k = _check_mode(mode) + 1
        return k * (k + self.dim - 1) / self.radius_sq(t)

    def einstein_term(self, mode, t):
        # E = e g with e constant, and int |grad f|^2 = mu
        e = self.einstein_bounds(t).lambda_min
        return e * self.eigenvalue(mode, t)

    def laplacian_variation_rate(self, mode, t):
        return 2 * (self.dim - 1) * self.eigenvalue(mode, t) / self.radius_sq(t)

    def scaled(self, s):
        return RoundSphere(self.dim, self.r0 * s)


@dataclass(frozen=True)
class HyperbolicScaled(ModelGeometry):
    """Compact hyperbolic surface of Gauss curvature ``-1/c0``.

    No closed-form spectrum exists, so the initial eigenvalues (nonzero,
    ascending) must be supplied to query ``eigenvalue``.
    """

    c0: float = 1.0
    spectrum: tuple = field(default=None)
    family = "HyperbolicScaled"
    dim = 2

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("HyperbolicScaled needs c0 > 0")
        if self.spectrum is not None:
            spec = tuple(float(v) for v in self.spectrum)
            if any(v <= 0 for v in spec) or list(spec) != sorted(spec):
                raise ValueError("initial spectrum must be positive and ascending")
            object.__setattr__(self, "spectrum", spec)

    def blocks(self, t):
        t = self.check_time(t)
        return [Block(2, (self.c0 + 2 * t) / self.c0, -1.0 / (self.c0 + 2 * t))]

    def lengths(self, t):
        return {"c": self.c0 + 2 * self.check_time(t)}

    def scalar_curvature(self, t):
        return -2.0 / (self.c0 + 2 * self.check_time(t))

    def eigenvalue(self, mode, t):
        mode = _check_mode(mode)
        if self.spectrum is None:
            raise UnknownSpectrum("HyperbolicScaled built without an initial spectrum")
        if mode >= len(self.spectrum):
            raise UnknownSpectrum(f"mode {mode} beyond the {len(self.spectrum)} supplied eigenvalues")
        return self.spectrum[mode] * self.c0 / (self.c0 + 2 * self.check_time(t))

    def einstein_term(self, mode, t):
        self.eigenvalue(mode, t)
        return 0.0

    def laplacian_variation_rate(self, mode, t):
        return self.scalar_curvature(t) * self.eigenvalue(mode, t)

    def scaled(self, s):
        spec = None if self.spectrum is None else tuple(v / s**2 for v in self.spectrum)
        return HyperbolicScaled(self.c0 * s**2, spec)


def _distinct_ladder(values):
    out = []
    for v in sorted(values):
        if not out or v > out[-1] * (1 + 1e-12):
            out.append(v)
    return out


@dataclass(frozen=True)
class FlatTorus(ModelGeometry):
    lx: float = 1.0
    ly: float = 1.0
    family = "FlatTorus"
    dim = 2

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("FlatTorus needs positive side lengths")

    def blocks(self, t):
        self.check_time(t)
        return [Block(2, 1.0, 0.0)]

    def lengths(self, t):
        self.check_time(t)
        return {"lx": self.lx, "ly": self.ly}

    def ladder(self, count):
        """First ``count`` distinct nonzero lattice eigenvalues ``(2 pi p/lx)^2 + (2 pi q/ly)^2``."""
        kx, ky = (2 * math.pi / self.lx) ** 2, (2 * math.pi / self.ly) ** 2
        cutoff = min(kx, ky)
        while True:
            P = int(math.sqrt(cutoff / kx)) + 1
            Q = int(math.sqrt(cutoff / ky)) + 1
            vals = [
                p * p * kx + q * q * ky
                for p in range(P + 1)
                for q in range(Q + 1)
                if (p or q) and p * p * kx + q * q * ky <= cutoff
            ]
            ladder = _distinct_ladder(vals)
            if len(ladder) >= count:
                return ladder[:count]
            cutoff *= 2

    def eigenvalue(self, mode, t):
        mode = _check_mode(mode)
        self.check_time(t)
        return self.ladder(mode + 1)[mode]

    def einstein_term(self, mode, t):
        return 0.0

    def laplacian_variation_rate(self, mode, t):
        self.check_time(t)
        return 0.0

    def scaled(self, s):
        return FlatTorus(self.lx * s, self.ly * s)


@dataclass(frozen=True)
class SphereCircleProduct(ModelGeometry):
    """``S^2(a) x S^1(b)``: the sphere shrinks, the circle stays put.

    Modes are the pairs ``(l, m)`` (``l, m >= 0``, not both zero) ordered by
    their eigenvalue ``l(l+1)/a0^2 + m^2/b0^2`` at t=0, ties broken
    lexicographically.  The ordering is frozen at t=0 so each index follows
    one smooth branch for all t.
    """

    a0: float = 1.0
    b0: float = 1.0
    family = "SphereCircleProduct"
    dim = 3

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("SphereCircleProduct needs positive radii")

    def maximal_time(self):
        return self.a0**2 / 2

    def sphere_radius_sq(self, t):
        return self.a0**2 - 2 * self.check_time(t)

    def blocks(self, t):
        a2 = self.sphere_radius_sq(t)
        return [Block(2, a2 / self.a0**2, 1.0 / a2), Block(1, 1.0, 0.0)]

    def lengths(self, t):
        return {"a": math.sqrt(self.sphere_radius_sq(t)), "b": self.b0}

    def scalar_curvature(self, t):
        return 2.0 / self.sphere_radius_sq(t)

    def einstein_bounds(self, t):
        a2 = self.sphere_radius_sq(t)
        return EinsteinBounds(-1.0 / a2, 0.0)

    def mode_pairs(self, count):
        """The first ``count`` ``(l, m)`` pairs of the t=0 ladder."""
        cutoff = 2.0 / self.a0**2 + 1.0 / self.b0**2
        while True:
            L = int(math.sqrt(cutoff) * self.a0) + 1
            M = int(math.sqrt(cutoff) * self.b0) + 1
            pairs = [
                (l, m)
                for l in range(L + 1)
                for m in range(M + 1)
                if (l or m) and l * (l + 1) / self.a0**2 + m * m / self.b0**2 <= cutoff
            ]
            if len(pairs) >= count:
                pairs.sort(key=lambda lm: (lm[0] * (lm[0] + 1) / self.a0**2 + lm[1] ** 2 / self.b0**2, lm))
                return pairs[:count]
            cutoff *= 2

    def mode_decomposition(self, mode):
        mode = _check_mode(mode)
        return self.mode_pairs(mode + 1)[mode]

    def mode_index(self, l, m):
        """Inverse of ``mode_decomposition``."""
        if l < 0 or m < 0 or not (l or m):
            raise ValueError("need l, m >= 0, not both zero")
        count = 1
        while True:
            pairs = self.mode_pairs(count)
            if (l, m) in pairs:
                return pairs.index((l, m))
            count *= 2

    def eigenvalue(self, mode, t):
        l, m = self.mode_decomposition(mode)
        return l * (l + 1) / self.sphere_radius_sq(t) + m * m / self.b0**2

    def einstein_term(self, mode, t):
        # only the circle-direction gradient sees E = -(1/a^2) g there
        l, m = self.mode_decomposition(mode)
        return -(m * m / self.b0**2) / self.sphere_radius_sq(t)

    def laplacian_variation_rate(self, mode, t):
        l, m = self.mode_decomposition(mode)
        return 2.0 * l * (l + 1) / self.sphere_radius_sq(t) ** 2

    def scaled(self, s):
        return SphereCircleProduct(self.a0 * s, self.b0 * s)


FAMILIES = {
    "RoundSphere": RoundSphere,
    "HyperbolicScaled": HyperbolicScaled,
    "FlatTorus": FlatTorus,
    "SphereCircleProduct": SphereCircleProduct,
}


def maximal_time(model):
    return model.maximal_time()


def model_scalar_curvature(model, t):
    return model.scalar_curvature(t)


def model_einstein_bounds(model, t):
    return model.einstein_bounds(t)


def model_eigenvalue(model, mode, t):
    return model.eigenvalue(mode, t)


def model_rate_prediction(model, mode, t):
    """``mu R + 2 int E_ij f^i f^j`` evaluated in closed form."""
    return model.rate_prediction(mode, t)
