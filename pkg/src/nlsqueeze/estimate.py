"""From homodyne records to the nonlinear-squeezing curve.

The pipeline per reconstruction: estimate output moments <Y^n> with
standard errors at each of the four phases (0, pi/2, +-pi/4), invert the
triangular moment hierarchy phase by phase, recover the mixed moment
from the rotated third moments, and assemble the V(lambda) parabola.
Ensembles repeat this with independent derived seeds and report
pointwise statistics of the curve on a lambda grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ChannelConditionError, DataError
from .hilbert import PositionGrid, QuantumState
from .nlsq import HALF_PI, QUARTER_PI, MomentSet, NlsCurve, assemble_curve
from .readout import (
    ChannelCoefficients,
    ChannelParams,
    channel_coefficients,
    sample_homodyne,
    thermal_filtered_moment,
    vacuum_filtered_moment,
)

# phase schedule of one reconstruction: q needs orders up to 4, the others
# up to 3 (the +-pi/4 first moments are estimated even though they cancel
# from the curve, the n=3 inversion row consumes them).
PHASE_ORDERS = ((0.0, 4), (HALF_PI, 3), (QUARTER_PI, 3), (-QUARTER_PI, 3))

DEFAULT_LAMBDAS = (-0.2, 0.4, 101)

CQ_FLOOR = 1e-6


def derive_seed(*parts) -> int:
    """Deterministic 64-bit seed from an integer tuple, platform stable."""
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def default_lambda_grid() -> np.ndarray:
    lo, hi, npts = DEFAULT_LAMBDAS
    return np.linspace(lo, hi, npts)


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample means of Y^n with standard errors, n = 1..max_n."""

    means: np.ndarray       # index n-1 -> mean of Y^n
    std_errors: np.ndarray
    count: int

    @property
    def max_n(self) -> int:
        return self.means.size

    def mean(self, n: int) -> float:
        return float(self.means[n - 1])

    def std_error(self, n: int) -> float:
        return float(self.std_errors[n - 1])

    @classmethod
    def from_exact(cls, values, count: int = 10 ** 9) -> "EmpiricalMoments":
        v = np.asarray(values, dtype=float)
        return cls(means=v, std_errors=np.zeros_like(v), count=count)


def empirical_moments(samples, max_n: int) -> EmpiricalMoments:
    """One-pass accumulation of Y^n up to 2*max_n for means and errors.

    Samples are scaled by their max magnitude before powering, so the
    accumulators stay in range for any finite input.
    """
    if max_n < 1 or max_n > 4:
        raise ValueError(f"max_n must be in 1..4 (cubic protocol ceiling), got {max_n}")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 100:
        raise ValueError(f"need a 1-d array of at least 100 samples, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite sample in homodyne record")
    count = x.size
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        scale = 1.0
    w = x / scale
    raw = np.empty(2 * max_n)
    cur = np.ones_like(w)
    for k in range(1, 2 * max_n + 1):
        cur = cur * w
        raw[k - 1] = cur.mean()
    means = np.empty(max_n)
    errs = np.empty(max_n)
    bessel = count / (count - 1.0)
    for n in range(1, max_n + 1):
        mu = raw[n - 1]
        var = max(raw[2 * n - 1] - mu * mu, 0.0) * bessel
        means[n - 1] = scale ** n * mu
        errs[n - 1] = scale ** n * math.sqrt(var / count)
    return EmpiricalMoments(means=means, std_errors=errs, count=count)


def invert_hierarchy(em: EmpiricalMoments, coeffs: ChannelCoefficients,
                     n_bar: float, phi: float = 0.0,
                     cq_floor: float = CQ_FLOOR) -> MomentSet:
    """Triangular solve of the output-moment hierarchy at one phase.

    Row by row (V2 = 1/2, E_k the filtered thermal moments, noise2 the
    order-2 noise floor V2 + c_E^2 E2):

        <Q>   = <Y>/c_Q
        <Q^2> = (<Y^2> - noise2)/c_Q^2
        <Q^3> = (<Y^3> - 3 c_Q <Q> noise2)/c_Q^3
        <Q^4> = (<Y^4> - V4 - c_E^4 E4 - 6 V2 c_E^2 E2
                 - 6 c_Q^2 <Q^2> noise2)/c_Q^4

    Standard errors are first-order propagated through each row;
    covariances between different output moments are neglected.
    """
    cq, ce = coeffs.c_Q, coeffs.c_E
    if abs(cq) < cq_floor:
        raise ChannelConditionError(
            f"|c_Q| = {abs(cq):.2e} below {cq_floor:g}; channel too weak to invert"
        )
    V2 = vacuum_filtered_moment(2)
    V4 = vacuum_filtered_moment(4)
    E2 = thermal_filtered_moment(2, n_bar)
    E4 = thermal_filtered_moment(4, n_bar)
    noise2 = V2 + ce ** 2 * E2
    m = MomentSet(provenance="estimated")
    q = {}
    s = {}
    for n in range(1, em.max_n + 1):
        y, sy = em.mean(n), em.std_error(n)
        if n == 1:
            q[1] = y / cq
            s[1] = sy / abs(cq)
        elif n == 2:
            q[2] = (y - noise2) / cq ** 2
            s[2] = sy / cq ** 2
        elif n == 3:
            q[3] = (y - 3.0 * cq * q[1] * noise2) / cq ** 3
            s[3] = math.sqrt((sy / abs(cq) ** 3) ** 2
                             + (3.0 * noise2 * s[1] / cq ** 2) ** 2)
        else:
            q[4] = (y - V4 - ce ** 4 * E4 - 6.0 * V2 * ce ** 2 * E2
                    - 6.0 * cq ** 2 * q[2] * noise2) / cq ** 4
            s[4] = math.sqrt((sy / cq ** 4) ** 2
                             + (6.0 * noise2 * s[2] / cq ** 2) ** 2)
        m.set(phi, n, q[n], s[n])
    return m


def mixed_moment_recovery(m: MomentSet):
    """Symmetrized mixed moment from the rotated third moments.

    <p q^2 + q^2 p> = (2 sqrt(2)/3)(<Q^3_{pi/4}> - <Q^3_{-pi/4}>)
                      - (2/3) <p^3>,
    with the +-iq commutator terms cancelling in the difference.
    Returns (value, std_error).
    """
    m.require(((QUARTER_PI, 3), (-QUARTER_PI, 3), (HALF_PI, 3)))
    c = 2.0 * math.sqrt(2.0) / 3.0
    plus, minus = m.get(QUARTER_PI, 3), m.get(-QUARTER_PI, 3)
    p3 = m.get(HALF_PI, 3)
    value = c * (plus - minus) - (2.0 / 3.0) * p3
    err = math.sqrt(c ** 2 * (m.error(QUARTER_PI, 3) ** 2
                              + m.error(-QUARTER_PI, 3) ** 2)
                    + (2.0 / 3.0) ** 2 * m.error(HALF_PI, 3) ** 2)
    return value, err


def run_reconstruction(state: QuantumState, params: ChannelParams, count: int,
                       seed: int, grid: PositionGrid | None = None):
    """One full reconstruction: 4 phases, count samples each.

    Returns (MomentSet, NlsCurve) with estimated provenance.
    """
    ms = MomentSet(provenance="estimated")
    for k, (phi, order) in enumerate(PHASE_ORDERS):
        p_k = replace(params, phi=phi)
        coeffs = channel_coefficients(p_k, "exact")
        samples = sample_homodyne(state, p_k, count, derive_seed(seed, k), grid=grid)
        em = empirical_moments(samples, max_n=order)
        ms.update(invert_hierarchy(em, coeffs, p_k.n_bar, phi=phi))
    ms.set_mixed(*mixed_moment_recovery(ms))
    return ms, assemble_curve(ms)


@dataclass
class EnsembleReport:
    """Pointwise curve statistics over R reconstructions plus the
    per-coefficient and per-moment statistics and the input echo."""

    lambdas: np.ndarray
    v_mean: np.ndarray
    v_std: np.ndarray
    coeff_values: dict     # name -> ndarray over replicates (a0, a1, a2)
    coeff_mean: dict
    coeff_std: dict
    moment_mean: dict      # (phi, n) -> mean over replicates
    moment_std: dict
    mixed_mean: float
    mixed_std: float
    params: ChannelParams
    count: int
    R: int
    base_seed: int
    seeds: list

    def v_at(self, lam: float):
        """Per-replicate curve values at one lambda."""
        a0 = self.coeff_values["a0"]
        a1 = self.coeff_values["a1"]
        a2 = self.coeff_values["a2"]
        return a0 + lam * (a1 + lam * a2)


def ensemble_run(state: QuantumState, params: ChannelParams, count: int,
                 R: int, base_seed: int, lambdas=None,
                 grid: PositionGrid | None = None, threads: int = 1) -> EnsembleReport:
    """R independent reconstructions with seeds derived from
    (base_seed, replicate index); statistics are pointwise in lambda.

    Replicates are independent tasks; with threads > 1 they run in a
    thread pool and are reduced in index order, so the report does not
    depend on scheduling.
    """
    if R < 2:
        raise ValueError(f"R must be >= 2 for ensemble statistics, got {R}")
    lam = default_lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    seeds = [derive_seed(base_seed, r) for r in range(R)]

    def one(seed):
        return run_reconstruction(state, params, count, seed, grid=grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]

    curves = [c for _, c in results]
    vmat = np.array([c(lam) for c in curves])
    coeff_values = {
        "a0": np.array([c.a0 for c in curves]),
        "a1": np.array([c.a1 for c in curves]),
        "a2": np.array([c.a2 for c in curves]),
    }
    keys = sorted(results[0][0].keys())
    moment_mean = {}
    moment_std = {}
    for key in keys:
        vals = np.array([ms.get(*key) for ms, _ in results])
        moment_mean[key] = float(vals.mean())
        moment_std[key] = float(vals.std(ddof=1))
    mixed_vals = np.array([ms.mixed for ms, _ in results])
    return EnsembleReport(
        lambdas=lam,
        v_mean=vmat.mean(axis=0),
        v_std=vmat.std(axis=0, ddof=1),
        coeff_values=coeff_values,
        coeff_mean={k: float(v.mean()) for k, v in coeff_values.items()},
        coeff_std={k: float(v.std(ddof=1)) for k, v in coeff_values.items()},
        moment_mean=moment_mean,
        moment_std=moment_std,
        mixed_mean=float(mixed_vals.mean()),
        mixed_std=float(mixed_vals.std(ddof=1)),
        params=params,
        count=count,
        R=R,
        base_seed=base_seed,
        seeds=seeds,
    )
