"""Catalog of convex functions with exact proximal maps and gradients.

Each function reports its capabilities through the flags ``proxable``,
``smooth`` (with a Lipschitz constant for the gradient), ``conjugable``
(closed-form Fenchel conjugate value), and ``separable`` (coordinatewise
structure, enabling proximal maps under diagonal metrics). Evaluations are
extended-real: indicator functions return ``math.inf`` outside their domain,
never NaN, and infinities propagate through sums.

All proximal maps are closed forms (or exact linear solves), so subproblem
error stays at machine precision.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import CapabilityError, DimensionMismatch, SingularSubproblem
from .linops import as_vector


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class ConvexFunction:
    """Base class; concrete kinds override the operations they support."""

    proxable = False
    smooth = False
    conjugable = False
    separable = False
    lipschitz = None

    def __init__(self, dim):
        dim = int(dim)
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _check(self, x, what="argument"):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            got = x.shape[0] if x.ndim == 1 else x.shape
            raise DimensionMismatch(f"{type(self).__name__} {what}", self.dim, got)
        return x

    def __call__(self, x):
        raise NotImplementedError

    def prox(self, v, t):
        """``argmin_u F(u) + ||u - v||^2 / (2 t)`` for ``t > 0``."""
        raise CapabilityError(f"{type(self).__name__} has no proximal map")

    def prox_diag(self, v, d):
        """``argmin_u F(u) + sum_i d_i (u_i - v_i)^2 / 2`` for ``d_i > 0``.

        Only separable kinds support this.
        """
        raise CapabilityError(f"{type(self).__name__} is not separable")

    def grad(self, x):
        raise CapabilityError(f"{type(self).__name__} is not smooth")

    def conjugate(self, y):
        """Closed-form Fenchel conjugate value ``sup_x <y,x> - F(x)``."""
        raise CapabilityError(f"{type(self).__name__} has no closed-form conjugate")

    def prox_conjugate(self, v, t):
        """Proximal map of ``t F*`` via the Moreau decomposition.

        Never requires an explicit conjugate:
        ``prox_{tF*}(v) = v - t prox_{F/t}(v / t)``.
        """
        if not self.proxable:
            raise CapabilityError(f"{type(self).__name__} has no proximal map")
        v = self._check(v)
        t = float(t)
        if t <= 0:
            raise ValueError("t must be positive")
        return v - t * self.prox(v / t, 1.0 / t)

    def distance_to_subdifferential(self, x, s):
        """Euclidean distance from ``s`` to the subdifferential at ``x``."""
        raise CapabilityError(
            f"{type(self).__name__} has no subdifferential distance formula"
        )


class Zero(ConvexFunction):
    """The identically-zero function."""

    proxable = True
    smooth = True
    conjugable = True
    separable = True
    lipschitz = 0.0

    def __call__(self, x):
        self._check(x)
        return 0.0

    def prox(self, v, t):
        v = self._check(v)
        if float(t) <= 0:
            raise ValueError("t must be positive")
        return v.copy()

    def prox_diag(self, v, d):
        v = self._check(v)
        return v.copy()

    def grad(self, x):
        self._check(x)
        return np.zeros(self.dim)

    def conjugate(self, y):
        y = self._check(y)
        return 0.0 if not np.any(y) else math.inf

    def distance_to_subdifferential(self, x, s):
        self._check(x)
        s = self._check(s, "subgradient target")
        return float(np.linalg.norm(s))


class L1Norm(ConvexFunction):
    """``weight * ||x||_1`` with ``weight > 0``."""

    proxable = True
    conjugable = True
    separable = True

    def __init__(self, dim, weight):
        super().__init__(dim)
        self.weight = float(weight)
        if self.weight <= 0:
            raise ValueError("weight must be positive")

    def __call__(self, x):
        x = self._check(x)
        return float(self.weight * np.abs(x).sum())

    def prox(self, v, t):
        v = self._check(v)
        t = float(t)
        if t <= 0:
            raise ValueError("t must be positive")
        return _soft_threshold(v, t * self.weight)

    def prox_diag(self, v, d):
        v = self._check(v)
        d = self._check(d, "diagonal")
        if np.any(d <= 0):
            raise ValueError("diagonal entries must be positive")
        return _soft_threshold(v, self.weight / d)

    def conjugate(self, y):
        y = self._check(y)
        tol = 1e-12 * (1.0 + self.weight)
        return 0.0 if float(np.abs(y).max()) <= self.weight + tol else math.inf

    def distance_to_subdifferential(self, x, s):
        # Coordinates are classified as active when |x_i| exceeds a small
        # tolerance; at active coordinates the subgradient is the signed
        # weight, elsewhere the interval [-weight, weight].
        x = self._check(x)
        s = self._check(s, "subgradient target")
        zero_tol = 1e-8 * (1.0 + float(np.abs(x).max()))
        active = np.abs(x) > zero_tol
        per_coord = np.where(
            active,
            np.abs(s - self.weight * np.sign(x)),
            np.maximum(np.abs(s) - self.weight, 0.0),
        )
        return float(np.linalg.norm(per_coord))


class SquaredL2(ConvexFunction):
    """``(weight / 2) * ||x - shift||^2`` with ``weight > 0``."""

    proxable = True
    smooth = True
    conjugable = True
    separable = True

    def __init__(self, dim, shift=0.0, weight=1.0):
        super().__init__(dim)
        if np.ndim(shift) == 0:
            shift = np.full(dim, float(shift))
        self.shift = as_vector(shift, dim, "SquaredL2 shift")
        self.shift.setflags(write=False)
        self.weight = float(weight)
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        self.lipschitz = self.weight

    def __call__(self, x):
        x = self._check(x)
        diff = x - self.shift
        return float(0.5 * self.weight * (diff @ diff))

    def prox(self, v, t):
        v = self._check(v)
        t = float(t)
        if t <= 0:
            raise ValueError("t must be positive")
        return (v + t * self.weight * self.shift) / (1.0 + t * self.weight)

    def prox_diag(self, v, d):
        v = self._check(v)
        d = self._check(d, "diagonal")
        if np.any(d <= 0):
            raise ValueError("diagonal entries must be positive")
        return (d * v + self.weight * self.shift) / (d + self.weight)

    def grad(self, x):
        x = self._check(x)
        return self.weight * (x - self.shift)

    def conjugate(self, y):
        y = self._check(y)
        return float(y @ self.shift + (y @ y) / (2.0 * self.weight))

    def distance_to_subdifferential(self, x, s):
        x = self._check(x)
        s = self._check(s, "subgradient target")
        return float(np.linalg.norm(s - self.grad(x)))


class BoxIndicator(ConvexFunction):
    """Indicator of the box ``lower <= x <= upper`` (coordinatewise)."""

    proxable = True
    conjugable = True
    separable = True

    def __init__(self, dim, lower, upper):
        super().__init__(dim)
        if np.ndim(lower) == 0:
            lower = np.full(dim, float(lower))
        if np.ndim(upper) == 0:
            upper = np.full(dim, float(upper))
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != (dim,) or upper.shape != (dim,):
            raise DimensionMismatch("BoxIndicator bounds", dim, lower.shape)
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lower > upper):
            raise ValueError("box needs lower <= upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower = lower
        self.upper = upper

    def __call__(self, x):
        x = self._check(x)
        inside = bool(np.all(x >= self.lower) and np.all(x <= self.upper))
        return 0.0 if inside else math.inf

    def prox(self, v, t):
        v = self._check(v)
        if float(t) <= 0:
            raise ValueError("t must be positive")
        return np.clip(v, self.lower, self.upper)

    def prox_diag(self, v, d):
        v = self._check(v)
        return np.clip(v, self.lower, self.upper)

    def conjugate(self, y):
        # Support function of the box; handles infinite bounds without
        # producing 0 * inf.
        y = self._check(y)
        total = 0.0
        for yi, lo, hi in zip(y, self.lower, self.upper):
            if yi > 0.0:
                total += hi * yi
            elif yi < 0.0:
                total += lo * yi
            if math.isinf(total):
                return math.inf
        return float(total)

    def distance_to_subdifferential(self, x, s):
        x = self._check(x)
        s = self._check(s, "subgradient target")
        contrib = np.empty(self.dim)
        for i in range(self.dim):
            lo, hi = self.lower[i], self.upper[i]
            tol_lo = 1e-12 * (1.0 + abs(lo)) if math.isfinite(lo) else 0.0
            tol_hi = 1e-12 * (1.0 + abs(hi)) if math.isfinite(hi) else 0.0
            if x[i] < lo - tol_lo or x[i] > hi + tol_hi:
                return math.inf  # empty subdifferential outside the box
            at_lo = math.isfinite(lo) and abs(x[i] - lo) <= tol_lo
            at_hi = math.isfinite(hi) and abs(x[i] - hi) <= tol_hi
            if at_lo and at_hi:
                contrib[i] = 0.0
            elif at_lo:
                contrib[i] = max(s[i], 0.0)
            elif at_hi:
                contrib[i] = max(-s[i], 0.0)
            else:
                contrib[i] = abs(s[i])
        return float(np.linalg.norm(contrib))


class Quadratic(ConvexFunction):
    """``(1/2) <x, Q x> + <q, x>`` with PSD ``Q`` (enforced at construction)."""

    proxable = True
    smooth = True

    # Dense Cholesky keeps the subproblem exact at desk scale; conjugate
    # gradient takes over for larger dimensions.
    DENSE_LIMIT = 500

    def __init__(self, Q, q=None):
        Q = np.array(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be a square 2-D array")
        dim = Q.shape[0]
        super().__init__(dim)
        scale = max(1.0, float(np.abs(Q).max()))
        if float(np.abs(Q - Q.T).max()) > 1e-12 * scale:
            raise ValueError("Q must be symmetric")
        Q = (Q + Q.T) / 2.0
        eigs = np.linalg.eigvalsh(Q)
        if float(eigs[0]) < -1e-10 * scale:
            raise ValueError(f"Q must be PSD; smallest eigenvalue {eigs[0]:.3e}")
        Q.setflags(write=False)
        self.Q = Q
        if q is None:
            q = np.zeros(dim)
        self.q = as_vector(q, dim, "Quadratic linear term")
        self.q.setflags(write=False)
        self.lipschitz = max(0.0, float(eigs[-1]))
        self._chol_cache = {}

    def __call__(self, x):
        x = self._check(x)
        return float(0.5 * (x @ (self.Q @ x)) + self.q @ x)

    def grad(self, x):
        x = self._check(x)
        return self.Q @ x + self.q

    def prox(self, v, t):
        v = self._check(v)
        t = float(t)
        if t <= 0:
            raise ValueError("t must be positive")
        rhs = v - t * self.q
        if self.dim < self.DENSE_LIMIT:
            factor = self._chol_cache.get(t)
            if factor is None:
                system = np.eye(self.dim) + t * self.Q
                try:
                    factor = scipy.linalg.cho_factor(system)
                except scipy.linalg.LinAlgError as exc:
                    raise SingularSubproblem(str(exc)) from exc
                self._chol_cache[t] = factor
            # check_finite off: non-finite inputs propagate to the caller's
            # own guard instead of failing inside scipy
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        system = scipy.sparse.linalg.LinearOperator(
            (self.dim, self.dim), matvec=lambda u: u + t * (self.Q @ u)
        )
        sol, info = scipy.sparse.linalg.cg(
            system, rhs, rtol=1e-14, atol=0.0, maxiter=20 * self.dim
        )
        if info != 0:
            raise SingularSubproblem(f"conjugate gradient failed (info={info})")
        return sol

    def distance_to_subdifferential(self, x, s):
        x = self._check(x)
        s = self._check(s, "subgradient target")
        return float(np.linalg.norm(s - self.grad(x)))


class Huber(ConvexFunction):
    """Huber penalty ``weight * sum_i phi_delta(x_i)``.

    ``phi_delta(r) = r^2 / (2 delta)`` for ``|r| <= delta``, else
    ``|r| - delta/2``. Smooth with gradient Lipschitz constant
    ``weight / delta``.
    """

    proxable = True
    smooth = True
    separable = True

    def __init__(self, dim, delta, weight=1.0):
        super().__init__(dim)
        self.delta = float(delta)
        self.weight = float(weight)
        if self.delta <= 0 or self.weight <= 0:
            raise ValueError("delta and weight must be positive")
        self.lipschitz = self.weight / self.delta

    def __call__(self, x):
        x = self._check(x)
        a = np.abs(x)
        quad = a <= self.delta
        vals = np.where(quad, x * x / (2.0 * self.delta), a - self.delta / 2.0)
        return float(self.weight * vals.sum())

    def grad(self, x):
        x = self._check(x)
        return self.weight * np.clip(x / self.delta, -1.0, 1.0)

    def _prox_scaled(self, v, scale):
        # scale = t * weight per coordinate
        inner = np.abs(v) <= self.delta + scale
        return np.where(
            inner,
            v * self.delta / (self.delta + scale),
            v - scale * np.sign(v),
        )

    def prox(self, v, t):
        v = self._check(v)
        t = float(t)
        if t <= 0:
            raise ValueError("t must be positive")
        return self._prox_scaled(v, t * self.weight)

    def prox_diag(self, v, d):
        v = self._check(v)
        d = self._check(d, "diagonal")
        if np.any(d <= 0):
            raise ValueError("diagonal entries must be positive")
        return self._prox_scaled(v, self.weight / d)

    def distance_to_subdifferential(self, x, s):
        x = self._check(x)
        s = self._check(s, "subgradient target")
        return float(np.linalg.norm(s - self.grad(x)))


def from_spec(spec, dim):
    """Build a catalog function from a config table.

    ``spec`` is a mapping with a ``kind`` key among ``zero``, ``l1``,
    ``squared_l2``, ``box``, ``quadratic``, ``huber`` plus kind-specific
    parameters. ``dim`` fixes the dimension unless the parameters imply it.
    """
    if "kind" not in spec:
        raise ValueError("function spec needs a 'kind' key")
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "zero":
        return Zero(dim)
    if kind == "l1":
        return L1Norm(dim, weight=params["weight"])
    if kind == "squared_l2":
        return SquaredL2(
            dim, shift=params.get("shift", 0.0), weight=params.get("weight", 1.0)
        )
    if kind == "box":
        return BoxIndicator(dim, lower=params["lower"], upper=params["upper"])
    if kind == "quadratic":
        return Quadratic(params["matrix"], params.get("linear"))
    if kind == "huber":
        return Huber(dim, delta=params["delta"], weight=params.get("weight", 1.0))
    raise ValueError(f"unknown function kind {kind!r}")
