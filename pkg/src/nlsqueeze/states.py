"""Factories for the mechanical states under test.

The cubic phase approximant exp(i gamma q^3)|0> is built in the position
representation, where the cubic unitary acts as a pointwise phase, and
projected back onto the first N Fock states.  The only approximation is
that projection, measured by the recorded leakage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TruncationError
from .hilbert import (
    LEAK_TOL,
    PositionGrid,
    QuantumState,
    build_basis,
    default_grid,
    displace,
    validate_state,
)

KINDS = ("vacuum", "coherent", "thermal", "cubic_phase", "displaced")
GAMMA_MAX = 0.5


@dataclass(frozen=True)
class StateSpec:
    """Declarative description of a mechanical state.

    kind selects the family; beta, n_bar, gamma, alpha are the
    kind-specific parameters; N is the truncation dimension.  A displaced
    state wraps an inner spec and applies the displacement alpha to it.
    """

    kind: str
    beta: complex = 0j
    n_bar: float = 0.0
    gamma: float = 0.0
    alpha: complex = 0j
    N: int = 128
    inner: "StateSpec | None" = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")
        if self.N < 1:
            raise ValueError(f"truncation dimension must be >= 1, got {self.N}")
        for name in ("n_bar", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        for name in ("beta", "alpha"):
            v = getattr(self, name)
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.n_bar < 0:
            raise ValueError(f"n_bar must be >= 0, got {self.n_bar}")
        if self.kind == "cubic_phase" and abs(self.gamma) > GAMMA_MAX:
            raise ValueError(
                f"|gamma| = {abs(self.gamma)} exceeds the configured bound {GAMMA_MAX}"
            )
        if self.kind == "displaced" and self.inner is None:
            raise ValueError("displaced state needs an inner StateSpec")


def _vacuum(N: int) -> np.ndarray:
    rho = np.zeros((N, N), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def _coherent_amplitudes(beta: complex, N: int) -> np.ndarray:
    c = np.zeros(N, dtype=complex)
    c[0] = math.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, N):
        c[n] = c[n - 1] * beta / math.sqrt(n)
    return c


def make_state(spec: StateSpec, grid: PositionGrid | None = None,
               leak_tol: float = LEAK_TOL) -> QuantumState:
    """Construct the density matrix described by spec.

    Parameters
    ----------
    spec : StateSpec
    grid : PositionGrid, optional
        Needed for the cubic phase construction; defaults to
        default_grid(spec.N).
    leak_tol : float
        Maximum tolerated truncation leakage.

    Raises
    ------
    TruncationError
        If the construction loses more than leak_tol of the norm; the fix
        is a larger N or a larger grid.
    """
    N = spec.N
    if grid is None:
        grid = default_grid(N)

    if spec.kind == "vacuum":
        state = QuantumState(rho=_vacuum(N))

    elif spec.kind == "coherent":
        c = _coherent_amplitudes(spec.beta, N)
        norm2 = float(np.sum(np.abs(c) ** 2))
        leak = max(0.0, 1.0 - norm2)
        if leak > leak_tol:
            raise TruncationError(
                f"coherent beta={spec.beta} leaks {leak:.2e} at N={N}; increase N"
            )
        c = c / math.sqrt(norm2)
        state = QuantumState(rho=np.outer(c, c.conj()), leakage=leak)

    elif spec.kind == "thermal":
        ratio = spec.n_bar / (spec.n_bar + 1.0)
        pops = (1.0 - ratio) * ratio ** np.arange(N)
        total = float(pops.sum())
        leak = max(0.0, 1.0 - total)
        if leak > leak_tol:
            raise TruncationError(
                f"thermal n_bar={spec.n_bar} leaks {leak:.2e} at N={N}; increase N"
            )
        state = QuantumState(rho=np.diag(pops / total).astype(complex), leakage=leak)

    elif spec.kind == "cubic_phase":
        basis = build_basis(N, grid)
        x = grid.points
        psi = basis.values[0] * np.exp(1j * spec.gamma * x ** 3)
        c = (basis.values * grid.spacing) @ psi
        norm2 = float(np.sum(np.abs(c) ** 2))
        leak = max(0.0, 1.0 - norm2)
        if leak > leak_tol:
            raise TruncationError(
                f"cubic gamma={spec.gamma} leaks {leak:.2e} at N={N} on "
                f"extent {grid.extent:g}; increase N or the grid"
            )
        c = c / math.sqrt(norm2)
        state = QuantumState(rho=np.outer(c, c.conj()), leakage=leak)

    elif spec.kind == "displaced":
        inner = make_state(spec.inner, grid=grid, leak_tol=leak_tol)
        return displace(inner, spec.alpha, leak_tol=leak_tol)

    else:  # pragma: no cover - guarded by StateSpec
        raise ValueError(f"unhandled kind {spec.kind!r}")

    return validate_state(state, leak_tol=leak_tol)
