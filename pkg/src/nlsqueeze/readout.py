"""Forward model of the QND measurement chain.

After adiabatic elimination of the cavity and filtering with the flat
temporal mode 1/sqrt(tau), the detected output quadrature is

    Y_out = Y_in + c_Q Q_phi(0) + c_E E

with Y_in the filtered optical vacuum (variance 1/2), Q_phi(0) the
mechanical quadrature at t = 0, and E a Gaussian quadrature of the
thermal bath with variance n_bar + 1/2.  The three terms are
independent, which is what makes the output-moment hierarchy triangular.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IncompleteMomentError, SamplingError
from .hilbert import PositionGrid, QuantumState, default_grid, marginal_density
from .nlsq import MomentSet

_trapz = getattr(np, "trapezoid", None) or np.trapz

# Below this Gamma_m * tau the exact radicand x + 4 e^{-x/2} - e^{-x} - 3
# cancels catastrophically (relative error ~ 12 eps / x^2), so the series
# x^3/12 - x^4/32 + 7 x^5/960 takes over; both are ~1e-7 accurate at the
# crossover.
_SERIES_CROSSOVER = 1e-4

SAMPLE_BLOCK = 1 << 16


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of the readout channel, all rates in units of
    kappa (kappa itself sets the frequency scale and defaults to 1)."""

    G: float
    Gamma_m: float
    n_bar: float
    tau: float
    kappa: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("G", "Gamma_m", "n_bar"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.adiabatic:
            warnings.warn(
                "channel outside the adiabatic regime (needs kappa*tau >> 1 "
                "and G <= kappa); coefficients may not describe the physics",
                stacklevel=2,
            )

    @property
    def adiabatic(self) -> bool:
        return self.kappa * self.tau >= 10.0 and self.G <= self.kappa

    @property
    def cooperativity(self) -> float:
        denom = self.n_bar * self.Gamma_m * self.kappa
        if denom == 0:
            return math.inf
        return self.G ** 2 / denom


@dataclass(frozen=True)
class ChannelCoefficients:
    """Gains multiplying Q_phi(0) and the thermal quadrature E; both are
    <= 0, carrying the overall minus sign of the interaction."""

    c_Q: float
    c_E: float
    order: str = "exact"


def _radicand(x: float) -> float:
    # f(x) = x + 4 exp(-x/2) - exp(-x) - 3 >= 0 for x >= 0
    if x < _SERIES_CROSSOVER:
        return x ** 3 / 12.0 - x ** 4 / 32.0 + 7.0 * x ** 5 / 960.0
    return x + 4.0 * math.expm1(-0.5 * x) - math.expm1(-x)


def channel_coefficients(p: ChannelParams, order: str = "exact") -> ChannelCoefficients:
    """Channel gains (c_Q, c_E) for the filtered output quadrature.

    Parameters
    ----------
    p : ChannelParams
    order : {"exact", "first_order"}
        exact uses the closed forms
        c_Q = -(4G/Gamma_m) sqrt(2/(kappa tau)) (1 - e^{-Gamma_m tau/2}),
        c_E = -4G sqrt(2 f(Gamma_m tau) / (kappa tau Gamma_m^2)),
        f(x) = x + 4 e^{-x/2} - e^{-x} - 3,
        with series limits for small Gamma_m tau; first_order keeps the
        leading corrections
        c_Q = -2G sqrt(2 tau/kappa) (1 - Gamma_m tau/4),
        c_E = -2 G tau sqrt(2 Gamma_m/(3 kappa)).
    """
    if order not in ("exact", "first_order"):
        raise ValueError(f"order must be exact or first_order, got {order!r}")
    G, kappa, tau, Gm = p.G, p.kappa, p.tau, p.Gamma_m
    cq0 = -2.0 * G * math.sqrt(2.0 * tau / kappa)
    x = Gm * tau
    if order == "first_order":
        c_Q = cq0 * (1.0 - 0.25 * x)
        c_E = -2.0 * G * tau * math.sqrt(2.0 * Gm / (3.0 * kappa))
        return ChannelCoefficients(c_Q=c_Q, c_E=c_E, order=order)
    if x == 0.0:
        return ChannelCoefficients(c_Q=cq0, c_E=0.0, order=order)
    c_Q = cq0 * (-2.0 * math.expm1(-0.5 * x) / x)
    f = _radicand(x)
    if f < 0:  # impossible for x >= 0; kept as an internal consistency guard
        raise ArithmeticError(f"negative radicand {f} at Gamma_m tau = {x}")
    c_E = -4.0 * G * math.sqrt(2.0 * f / (kappa * tau)) / Gm
    return ChannelCoefficients(c_Q=c_Q, c_E=c_E, order=order)


def vacuum_filtered_moment(k: int) -> float:
    """k-th moment of the filtered vacuum quadrature: Gaussian with
    variance 1/2, so 0 for odd k and Gamma((k+1)/2)/sqrt(pi) for even k."""
    if k < 0:
        raise ValueError(f"moment order must be >= 0, got {k}")
    if k % 2 == 1:
        return 0.0
    return math.gamma((k + 1) / 2.0) / math.sqrt(math.pi)


def thermal_filtered_moment(k: int, n_bar: float) -> float:
    """k-th moment of the filtered thermal quadrature E: Gaussian with
    variance n_bar + 1/2, so (n_bar + 1/2)^{k/2} (k-1)!! for even k."""
    if k < 0:
        raise ValueError(f"moment order must be >= 0, got {k}")
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    if k % 2 == 1:
        return 0.0
    dfact = 1.0
    for j in range(k - 1, 0, -2):
        dfact *= j
    return (n_bar + 0.5) ** (k // 2) * dfact


def forward_output_moments(mech: MomentSet, p: ChannelParams,
                           coeffs: ChannelCoefficients, max_n: int) -> list:
    """Predicted <Y_out^n> for n = 1..max_n from mechanical moments.

    Expands (Y_in + c_Q Q + c_E E)^n over independent factors:
    <Y^n> = sum over k1+k2+k3=n of the multinomial weight times
    V_{k1} c_Q^{k2} <Q^{k2}> c_E^{k3} E_{k3}.

    Raises
    ------
    IncompleteMomentError
        If mech lacks <Q_phi^k> at the channel phase for some k <= max_n.
    """
    phi = p.phi
    qmom = [1.0]
    for k in range(1, max_n + 1):
        if not mech.has(phi, k):
            raise IncompleteMomentError(
                f"mechanical moment (phi={phi}, n={k}) needed for <Y^{max_n}>"
            )
        qmom.append(mech.get(phi, k))
    out = []
    for n in range(1, max_n + 1):
        total = 0.0
        for k1 in range(0, n + 1, 2):  # odd vacuum moments vanish
            v = vacuum_filtered_moment(k1)
            for k3 in range(0, n - k1 + 1, 2):  # odd thermal moments vanish
                k2 = n - k1 - k3
                w = math.comb(n, k1) * math.comb(n - k1, k3)
                total += (w * v * coeffs.c_E ** k3
                          * thermal_filtered_moment(k3, p.n_bar)
                          * coeffs.c_Q ** k2 * qmom[k2])
        out.append(total)
    return out


def _inverse_cdf_table(state: QuantumState, phi: float, grid: PositionGrid):
    dens = marginal_density(state, phi, grid)
    dx = grid.spacing
    F = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * dx)))
    total = F[-1]
    if not np.isfinite(total) or total <= 0:
        raise SamplingError(f"degenerate marginal: cumulative mass {total}")
    F = np.maximum.accumulate(F / total)
    return F, grid.points


def sample_homodyne(state: QuantumState, p: ChannelParams, count: int,
                    seed: int, grid: PositionGrid | None = None) -> np.ndarray:
    """Synthesize count homodyne records of Y_out.

    Q_phi(0) is drawn by inverse-CDF lookup on the cumulative trapezoid
    of the marginal density (linear interpolation inside a cell); Y_in
    and E are Gaussian.  The stream is partitioned into fixed-size
    blocks, each seeded from (seed, block index), so the result depends
    only on (seed, count) and any concurrent schedule producing the same
    blocks yields identical samples.  Per block the draw order is fixed:
    uniforms for Q, normals for Y_in, normals for E.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if grid is None:
        grid = default_grid(state.dim)
    coeffs = channel_coefficients(p, "exact")
    F, x = _inverse_cdf_table(state, p.phi, grid)
    dx = grid.spacing
    sig_in = math.sqrt(0.5)
    sig_E = math.sqrt(p.n_bar + 0.5)
    out = np.empty(count)
    n_blocks = (count + SAMPLE_BLOCK - 1) // SAMPLE_BLOCK
    for blk in range(n_blocks):
        lo = blk * SAMPLE_BLOCK
        m = min(SAMPLE_BLOCK, count - lo)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, blk))))
        # always draw whole blocks so a longer record extends a shorter
        # one instead of reshuffling the tail
        u = rng.random(SAMPLE_BLOCK)[:m]
        y_in = rng.standard_normal(SAMPLE_BLOCK)[:m] * sig_in
        e = rng.standard_normal(SAMPLE_BLOCK)[:m] * sig_E
        idx = np.clip(np.searchsorted(F, u, side="right"), 1, F.size - 1)
        f0 = F[idx - 1]
        df = F[idx] - f0
        t = np.where(df > 0, (u - f0) / np.where(df > 0, df, 1.0), 0.5)
        qs = x[idx - 1] + t * dx
        out[lo:lo + m] = y_in + coeffs.c_Q * qs + coeffs.c_E * e
    return out
