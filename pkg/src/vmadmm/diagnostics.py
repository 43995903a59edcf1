"""Numerical certificates for solver runs.

Everything the theory promises is evaluated here, on concrete traces:
Lagrangian values and the ergodic primal-dual gap with its gamma/k bound,
the distance-to-saddle energy ``u_k`` and successive-difference energy
``v_k`` with their one-step contraction inequality, the 1/sqrt(k)
feasibility decay bound, KKT residuals, and the per-iteration inequality
that drives the ergodic bound. All checks use absolute slack tolerances
because the compared quantities approach zero at convergence.

Functions here are pure over immutable traces; the domain regime for
``u``/``v`` (no smooth term, constant metrics) is enforced rather than
silently generalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import functions
from .errors import DimensionMismatch, UnsupportedSetting


# ---------------------------------------------------------------------------
# Lagrangian values
# ---------------------------------------------------------------------------


def lagrangian(problem, x, z, y):
    """``f(x) + h(x) + g(z) + <y, Ax - z>`` with extended-real propagation."""
    value = problem.f(x) + problem.h(x) + problem.g(z)
    if math.isinf(value):
        return value
    return value + float(y @ (problem.A.apply(x) - z))


def augmented_lagrangian(problem, x, z, y):
    """Lagrangian plus the penalty ``(c/2) ||Ax - z||^2``."""
    base = lagrangian(problem, x, z, y)
    if math.isinf(base):
        return base
    r = problem.A.apply(x) - z
    return base + 0.5 * problem.c * float(r @ r)


def gamma(problem, init, m1_0, m2_0, probe):
    """Constant of the ergodic gap bound, an initial-iterate quantity.

    ``(c/2)||Ax - z0||^2 + (1/2)(||x - x0||^2_{M1_0} + ||z - z0||^2_{M2_0})
    + (1/2c)||y - y0||^2`` evaluated at the probe ``(x, z, y)``.
    """
    x, z, y = probe
    r = problem.A.apply(np.asarray(x, dtype=float)) - init.z
    val = 0.5 * problem.c * float(r @ r)
    val += 0.5 * m1_0.seminorm_sq(np.asarray(x, dtype=float) - init.x)
    val += 0.5 * m2_0.seminorm_sq(np.asarray(z, dtype=float) - init.z)
    dy = np.asarray(y, dtype=float) - init.y
    val += float(dy @ dy) / (2.0 * problem.c)
    return val


# ---------------------------------------------------------------------------
# ergodic averages and the gap certificate
# ---------------------------------------------------------------------------


class ErgodicAverager:
    """Running means of (x, z, y) over iterates 1..k, compensated summation.

    Kahan compensation keeps the accumulated mean within ~1e-13 * k of the
    exact average, as required by the gap certificate.
    """

    def __init__(self, n, m):
        self.k = 0
        self._sums = [np.zeros(n), np.zeros(m), np.zeros(m)]
        self._comp = [np.zeros(n), np.zeros(m), np.zeros(m)]

    def update(self, x, z, y):
        for slot, vec in zip((0, 1, 2), (x, z, y)):
            term = np.asarray(vec, dtype=float) - self._comp[slot]
            total = self._sums[slot] + term
            self._comp[slot] = (total - self._sums[slot]) - term
            self._sums[slot] = total
        self.k += 1

    @property
    def x_bar(self):
        return self._sums[0] / self.k

    @property
    def z_bar(self):
        return self._sums[1] / self.k

    @property
    def y_bar(self):
        return self._sums[2] / self.k


@dataclass
class GapCertificate:
    """The ergodic primal-dual gap at iteration k against its gamma/k bound."""

    k: int
    gap: float
    bound: float
    slack: float
    probe: tuple
    finite: bool


def gap_certificate(problem, averager, probe, gamma0):
    """Gap ``l(x_bar, z_bar, y) - l(x, z, y_bar)`` versus ``gamma0 / k``.

    An infinite gap (probe outside a domain) is reported in the certificate,
    not thrown.
    """
    if averager.k < 1:
        raise ValueError("gap certificate needs k >= 1")
    x, z, y = probe
    left = lagrangian(problem, averager.x_bar, averager.z_bar, np.asarray(y, float))
    right = lagrangian(problem, np.asarray(x, float), np.asarray(z, float), averager.y_bar)
    gap = left - right
    bound = gamma0 / averager.k
    finite = math.isfinite(gap)
    return GapCertificate(
        k=averager.k,
        gap=gap,
        bound=bound,
        slack=bound - gap,
        probe=probe,
        finite=finite,
    )


# ---------------------------------------------------------------------------
# contraction energies u_k / v_k (no smooth term, constant metrics)
# ---------------------------------------------------------------------------


@dataclass
class SequencePair:
    """``u_k`` (distance-to-saddle energy) and ``v_{k+1}`` (step energy)."""

    k: int
    u: float
    v_next: float


def _require_uv_regime(problem):
    if not isinstance(problem.h, functions.Zero):
        raise UnsupportedSetting(
            "u/v energies are defined only when the smooth term is zero"
        )


def uv_energies(problem, trace, saddle, m1, m2):
    """Arrays ``u[1..K]`` and ``v[1..K]`` from a trace and a saddle point.

    ``v[k] = ||x_k - x_{k-1}||^2_{M1} + ||z_k - z_{k-1}||^2_{M2 + cI}
    + (1/c) ||y_k - y_{k-1}||^2`` and ``u[k]`` adds the saddle distances plus
    the trailing ``||z_k - z_{k-1}||^2_{M2}`` term. Index 0 of both arrays is
    NaN. Defined only for a zero smooth term and constant metrics.
    """
    _require_uv_regime(problem)
    xs, zs, ys = trace.xs, trace.zs, trace.ys
    x_star, z_star, y_star = (np.asarray(v, dtype=float) for v in saddle)
    c = problem.c
    K = trace.iterations
    u = np.full(K + 1, np.nan)
    v = np.full(K + 1, np.nan)
    for k in range(1, K + 1):
        dxs = x_star - xs[k]
        dzs = z_star - zs[k]
        dys = y_star - ys[k]
        dz_prev = zs[k] - zs[k - 1]
        u[k] = (
            m1.seminorm_sq(dxs)
            + m2.seminorm_sq(dzs)
            + c * float(dzs @ dzs)
            + float(dys @ dys) / c
            + m2.seminorm_sq(dz_prev)
        )
        dx = xs[k] - xs[k - 1]
        dy = ys[k] - ys[k - 1]
        v[k] = (
            m1.seminorm_sq(dx)
            + m2.seminorm_sq(dz_prev)
            + c * float(dz_prev @ dz_prev)
            + float(dy @ dy) / c
        )
    return u, v


def sequence_uv(problem, trace, saddle, m1, m2):
    """Stream of :class:`SequencePair` for ``k = 1..K-1``."""
    u, v = uv_energies(problem, trace, saddle, m1, m2)
    return [
        SequencePair(k=k, u=float(u[k]), v_next=float(v[k + 1]))
        for k in range(1, trace.iterations)
    ]


def inequality_v_check(pairs, zs, c):
    """Slack of the one-step contraction inequality, per k.

    ``slack_k = (u_k - u_{k+1}) - (v_{k+1} - c ||z_{k+1} - z_k||^2)``;
    nonnegative (to roundoff) whenever the iteration ran exactly.
    """
    slacks = []
    for cur, nxt in zip(pairs, pairs[1:]):
        k = cur.k
        dz = np.asarray(zs[k + 1], float) - np.asarray(zs[k], float)
        lhs = cur.v_next - c * float(dz @ dz)
        slacks.append((k, (cur.u - nxt.u) - lhs))
    return slacks


def uncorrected_v_slack(pairs):
    """Slack of the stronger, uncorrected inequality ``v_{k+1} <= u_k - u_{k+1}``.

    Logged as a finding only: a negative value here is not an error of the
    iteration, merely evidence that the strengthening fails.
    """
    return [
        (cur.k, (cur.u - nxt.u) - cur.v_next) for cur, nxt in zip(pairs, pairs[1:])
    ]


def v_monotone_check(pairs, tol=1e-10):
    """Whether ``v_{k+1} <= v_k`` along the stream; reports the first violation."""
    for prev, cur in zip(pairs, pairs[1:]):
        if cur.v_next > prev.v_next + tol:
            return False, cur.k
    return True, None


def accumulate_step_energy(trace, c):
    """``S = c * sum_k ||z_{k+1} - z_k||^2`` over the whole trace."""
    total = 0.0
    for a, b in zip(trace.zs, trace.zs[1:]):
        d = b - a
        total += float(d @ d)
    return c * total


def feasibility_rate(trace, c, u1, S):
    """Primal residual against its ``sqrt(c (u1 + S) / (k - 1))`` bound.

    Returns triples ``(k, ||A x_k - z_k||, bound_k)`` for ``k >= 2``. The
    bound follows from summing the contraction inequality and the
    monotonicity of the step energy.
    """
    out = []
    for k in range(2, trace.iterations + 1):
        bound = math.sqrt(c * (u1 + S) / (k - 1))
        out.append((k, trace.residual_norms[k - 1], bound))
    return out


def loglog_slope(ks, values, floor=1e-300):
    """Least-squares slope of log(value) against log(k).

    Nonpositive values are dropped (they only occur once the residual has
    converged past double precision); with fewer than two usable points the
    slope is -inf.
    """
    pts = [(math.log(k), math.log(v)) for k, v in zip(ks, values) if v > floor]
    if len(pts) < 2:
        return -math.inf
    lk = np.array([p[0] for p in pts])
    lv = np.array([p[1] for p in pts])
    return float(np.polyfit(lk, lv, 1)[0])


# ---------------------------------------------------------------------------
# KKT residual
# ---------------------------------------------------------------------------


def kkt_residual(problem, x, y):
    """Distance to satisfying the primal-dual optimality inclusions.

    The maximum of the distance from ``-A*y - grad h(x)`` to the
    subdifferential of f at x, and the distance from ``y`` to the
    subdifferential of g at Ax, both in closed form per catalog kind.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    target_f = -problem.A.adjoint(y) - problem.h.grad(x)
    dist_f = problem.f.distance_to_subdifferential(x, target_f)
    dist_g = problem.g.distance_to_subdifferential(problem.A.apply(x), y)
    return max(dist_f, dist_g)


# ---------------------------------------------------------------------------
# per-iteration inequality behind the ergodic bound
# ---------------------------------------------------------------------------


def iteration_inequality_check(problem, state_k, state_next, m1, m2, probe, L=None):
    """Slacks of the two per-iteration inequalities at a probe point.

    The first compares the Lagrangian of the new iterate against the probe
    Lagrangian plus telescoping metric terms (minus the step-energy terms,
    with the smooth correction ``L ||x+ - x_k||^2``); the second bounds the
    cross term ``c <z+ - z_k, A(x - x+)>``. Returns ``(slack1, slack2)``,
    both nonnegative (to roundoff) on genuine iterates; infinite probe values
    make slack1 infinite (a reported skip, not an error).
    """
    if L is None:
        L = problem.h.lipschitz
    c = problem.c
    x, z, y = (np.asarray(v, dtype=float) for v in probe)
    xk, zk, yk = state_k.x, state_k.z, state_k.y
    xn, zn, yn = state_next.x, state_next.z, state_next.y

    dx_step = xn - xk
    dz_step = zn - zk
    dy_step = yn - yk
    cross = c * float(dz_step @ problem.A.apply(x - xn))

    lhs = lagrangian(problem, xn, zn, y)
    rhs = lagrangian(problem, x, z, yn) + cross
    rhs += 0.5 * (
        m1.seminorm_sq(x - xk)
        + m2.seminorm_sq(z - zk)
        + float((y - yk) @ (y - yk)) / c
    )
    rhs -= 0.5 * (
        m1.seminorm_sq(x - xn)
        + m2.seminorm_sq(z - zn)
        + float((y - yn) @ (y - yn)) / c
    )
    rhs -= 0.5 * (
        m1.seminorm_sq(dx_step)
        - L * float(dx_step @ dx_step)
        + m2.seminorm_sq(dz_step)
        + float(dy_step @ dy_step) / c
    )
    slack1 = rhs - lhs

    ax_zk = problem.A.apply(x) - zk
    ax_zn = problem.A.apply(x) - zn
    slack2 = (
        0.5 * c * (float(ax_zk @ ax_zk) - float(ax_zn @ ax_zn))
        + float(dy_step @ dy_step) / (2.0 * c)
        - cross
    )
    return slack1, slack2


def descent_slack(problem, x_k, x_next, probe_x):
    """Slack of the smooth-term upper bound used by the iteration analysis.

    ``(L/2)||x+ - x_k||^2 - (h(x+) - h(x) + <grad h(x_k), x - x+>)``,
    nonnegative for convex h with an L-Lipschitz gradient.
    """
    L = problem.h.lipschitz
    x = np.asarray(probe_x, dtype=float)
    dx = x_next - x_k
    lhs = (
        problem.h(x_next)
        - problem.h(x)
        + float(problem.h.grad(x_k) @ (x - x_next))
    )
    return 0.5 * L * float(dx @ dx) - lhs


# ---------------------------------------------------------------------------
# dual objective
# ---------------------------------------------------------------------------


def dual_objective(problem, y):
    """Value of the Fenchel dual at ``y`` when it reduces to closed forms.

    Requires either the smooth term or f to vanish, so the infimal
    convolution of their conjugates collapses to a single conjugate.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.m,):
        raise DimensionMismatch("dual_objective y", problem.m, y.shape)
    w = -problem.A.adjoint(y)
    if isinstance(problem.h, functions.Zero):
        first = problem.f.conjugate(w)
    elif isinstance(problem.f, functions.Zero):
        first = problem.h.conjugate(w)
    else:
        raise UnsupportedSetting(
            "dual objective needs f or the smooth term to be zero"
        )
    return -first - problem.g.conjugate(y)


# ---------------------------------------------------------------------------
# probe sampling
# ---------------------------------------------------------------------------


def sample_ball_probes(center, radius, count, seed):
    """Deterministic probes in a ball around a (x, z, y) triple."""
    rng = np.random.default_rng(seed)
    cx, cz, cy = (np.asarray(v, dtype=float) for v in center)
    total = cx.size + cz.size + cy.size
    probes = []
    for _ in range(count):
        direction = rng.standard_normal(total)
        direction *= radius * rng.uniform() ** (1.0 / total) / np.linalg.norm(direction)
        probes.append(
            (
                cx + direction[: cx.size],
                cz + direction[cx.size : cx.size + cz.size],
                cy + direction[cx.size + cz.size :],
            )
        )
    return probes
