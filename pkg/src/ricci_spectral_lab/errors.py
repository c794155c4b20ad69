"""Exception hierarchy shared by every module of the lab."""


class RicciLabError(Exception):
    """Base class for all lab errors."""


class ConfigError(RicciLabError):
    """Invalid scenario configuration or invalid call arguments."""


class NumericalFailure(RicciLabError):
    """Base for failures of the numerical pipeline (CLI exit code 3)."""


class StabilityViolation(NumericalFailure):
    def __init__(self, dt, bound, time=None):
        self.dt = dt
        self.bound = bound
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"dt={dt:.6g} exceeds explicit stability bound {bound:.6g}{where}")


class BlowUp(NumericalFailure):
    def __init__(self, max_abs_phi, time=None):
        self.max_abs_phi = max_abs_phi
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"conformal factor left the guard band (max|phi|={max_abs_phi:.6g}){where}")


class NoConvergence(NumericalFailure):
    def __init__(self, mode_index, residual=None):
        self.mode_index = mode_index
        self.residual = residual
        msg = f"eigensolver did not converge for mode {mode_index}"
        if residual is not None:
            msg += f" (residual {residual:.3e})"
        super().__init__(msg)


class TimeOutOfRange(RicciLabError, ValueError):
    """Requested time lies outside [0, maximal_time)."""


class UnknownSpectrum(RicciLabError):
    """Model family has no eigenvalue data to report."""


class EmptyInterior(RicciLabError, ValueError):
    """Domain mask selects no interior node."""


class AmbiguousTracking(RicciLabError):
    """Top two branch overlaps are too close to call; carries the chosen pair."""

    def __init__(self, chosen, overlaps):
        self.chosen = chosen
        self.overlaps = overlaps
        super().__init__(f"ambiguous mode tracking, overlaps {overlaps[:2]}")


class HypothesisNotMet(RicciLabError):
    """A theorem's hypothesis fails, so its conclusion is not checked."""


class ClusterSkipped(RicciLabError):
    """Rate check skipped for a mode inside a degenerate eigenvalue cluster."""
