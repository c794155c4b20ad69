"""Built-in initial conformal factors, model families and check names."""

from __future__ import annotations

import math
import re

import numpy as np

from .models import FAMILIES

__all__ = ["PHI_EXPRESSIONS", "CHECKS", "parse_phi", "phi_field", "describe"]

PHI_EXPRESSIONS = {
    "flat": "phi = 0",
    "const(c)": "phi = c everywhere",
    "sinx(eps)": "phi = eps sin(2 pi x / Lx)",
    "siny(eps)": "phi = eps sin(2 pi y / Ly)",
    "bump(cx, cy, amplitude, width)": (
        "smooth bump of the given amplitude and width centered at (cx, cy); periodized on tori"
    ),
}

FAMILY_DESCRIPTIONS = {
    "RoundSphere": "round n-sphere of radius r0, shrinks to a point at r0^2/(2(n-1))",
    "HyperbolicScaled": "compact hyperbolic surface of curvature -1/c0, expands forever",
    "FlatTorus": "flat Lx x Ly torus, stationary",
    "SphereCircleProduct": "S^2(a0) x S^1(b0), sphere factor shrinks, circle static",
}

CHECKS = {
    "rate2d": "eigenvalue rate mu' = mu int R f^2 dv along a grid trajectory",
    "rate_general": "eigenvalue rate mu' = mu R + 2 int E_ij f^i f^j on closed models",
    "prop1": "exponential eigenvalue bounds under a uniform sign of R (surfaces)",
    "main_theorem": "mu nondecreasing when R >= 2a and E >= -a g",
    "eq5": "volume form evolution d(dv)/dt = -R dv",
    "eq6": "integrated Laplacian variation chain with test fields u, v",
    "eq7": "Laplacian variation Delta' u = 2 R^ij u_ij (= R Delta u on surfaces)",
    "bianchi": "contracted Bianchi identity 2 div Ric = grad R",
    "inverse_metric": "inverse metric evolution d(g^ij)/dt = 2 R^ij",
}

_CALL = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")
_ARITY = {"flat": 0, "const": 1, "sinx": 1, "siny": 1, "bump": 4}


def parse_phi(expr):
    """Split ``"bump(0.5, 0.5, 0.05, 0.25)"`` into ``("bump", (0.5, 0.5, 0.05, 0.25))``."""
    m = _CALL.match(str(expr))
    if not m or m.group(1) not in _ARITY:
        raise ValueError(f"unknown phi expression {expr!r}; choose from {sorted(PHI_EXPRESSIONS)}")
    name, arg_text = m.group(1), m.group(2)
    args = () if not arg_text or not arg_text.strip() else tuple(float(a) for a in arg_text.split(","))
    if len(args) != _ARITY[name]:
        raise ValueError(f"{name} takes {_ARITY[name]} arguments, got {len(args)}")
    if name == "bump" and not args[3] > 0:
        raise ValueError("bump width must be positive")
    return name, args


def phi_field(expr, x, y, extent, periodic):
    """Evaluate a catalog expression on node coordinates ``x, y``."""
    name, args = parse_phi(expr)
    lx, ly = extent
    if name == "flat":
        return np.zeros_like(x)
    if name == "const":
        return np.full_like(x, args[0])
    if name == "sinx":
        return args[0] * np.sin(2 * math.pi * x / lx)
    if name == "siny":
        return args[0] * np.sin(2 * math.pi * y / ly)
    cx, cy, amp, width = args
    if periodic:
        # von Mises form: smooth, periodic, Gaussian of the given width near the center
        kx = 2 * (lx / (2 * math.pi * width)) ** 2
        ky = 2 * (ly / (2 * math.pi * width)) ** 2
        return amp * np.exp(
            kx * (np.cos(2 * math.pi * (x - cx) / lx) - 1) + ky * (np.cos(2 * math.pi * (y - cy) / ly) - 1)
        )
    return amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2)


def describe():
    """Catalog listing in a fixed order."""
    lines = ["Model families:"]
    lines += [f"  {name:<22} {FAMILY_DESCRIPTIONS[name]}" for name in FAMILIES]
    lines.append("Initial phi expressions (grid lane):")
    lines += [f"  {name:<32} {text}" for name, text in PHI_EXPRESSIONS.items()]
    lines.append("Checks:")
    lines += [f"  {name:<16} {text}" for name, text in CHECKS.items()]
    return "\n".join(lines) + "\n"
