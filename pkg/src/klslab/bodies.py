"""Convex body oracles.

A body exposes membership, line-chord computation, and the rounding
guarantees (r, R, x0): the body contains the ball of radius r around the
interior point x0 and is contained in the ball of radius R around x0.
Chords are computed in closed form for every built-in kind; a bisection
fallback (relative tolerance 1e-9, at most 200 iterations) exists for
exotic subclasses that only implement membership.

The chord convention: chord(x, u) returns (t_lo, t_hi) such that
x + t*u is in the body exactly for t in [t_lo, t_hi].  For interior x
this interval contains 0.  Degenerate (zero-length) chords are legal.
"""

from __future__ import annotations

import numpy as np

_CHORD_REL_TOL = 1e-9
_CHORD_MAX_ITERS = 200


class BodyError(ValueError):
    """Raised for invalid body parameters or degenerate geometry."""


class Body:
    """Base class; concrete kinds override membership and chord."""

    kind = "abstract"

    def __init__(self, n, r, R, x0):
        if n < 1:
            raise BodyError(f"dimension must be >= 1, got {n}")
        if not (0 <= r <= R) or not np.isfinite(R):
            raise BodyError(f"need 0 <= r <= R < inf, got r={r}, R={R}")
        self.n = int(n)
        self.r = float(r)
        self.R = float(R)
        self.x0 = np.asarray(x0, dtype=float).reshape(n)

    def contains(self, x) -> bool:
        raise NotImplementedError

    def contains_many(self, X) -> np.ndarray:
        """Vectorized membership for an (m, n) array of points."""
        X = np.asarray(X, dtype=float)
        return np.array([self.contains(row) for row in X], dtype=bool)

    def chord(self, x, u):
        """Fallback chord by doubling + bisection; subclasses are analytic."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if not self.contains(x):
            raise BodyError("chord anchor must lie in the body")
        return (self._bisect_boundary(x, u, -1.0), self._bisect_boundary(x, u, 1.0))

    def _bisect_boundary(self, x, u, sign):
        unorm = float(np.linalg.norm(u))
        if unorm == 0.0:
            raise BodyError("chord direction must be nonzero")
        # An interior anchor is within 2R of every boundary point.
        t_out = sign * 4.0 * self.R / unorm + sign
        if self.contains(x + t_out * u):
            raise BodyError("direction appears unbounded; body guarantees violated")
        t_in = 0.0
        for _ in range(_CHORD_MAX_ITERS):
            mid = 0.5 * (t_in + t_out)
            if self.contains(x + mid * u):
                t_in = mid
            else:
                t_out = mid
            if abs(t_out - t_in) <= _CHORD_REL_TOL * max(1.0, abs(t_in)):
                break
        return t_in


def _interval_from_rows(num, den):
    """Solve den*t <= num rowwise and intersect.

    Rows with den == 0 impose no constraint on t (the anchor already
    satisfies them).  Returns (t_lo, t_hi), possibly equal.
    """
    t_lo, t_hi = -np.inf, np.inf
    pos = den > 0
    neg = den < 0
    # denormal den can overflow the ratio to inf: still a no-op constraint
    with np.errstate(over="ignore"):
        if np.any(pos):
            t_hi = float(np.min(num[pos] / den[pos]))
        if np.any(neg):
            t_lo = float(np.max(num[neg] / den[neg]))
    return t_lo, min(t_hi, np.inf)


class Ball(Body):
    kind = "ball"

    def __init__(self, n, radius=1.0, center=None):
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        super().__init__(n, radius, radius, center)
        self.radius = float(radius)
        self.center = center

    def contains(self, x):
        return float(np.dot(x - self.center, x - self.center)) <= self.radius**2 * (1 + 1e-12)

    def contains_many(self, X):
        d = X - self.center
        return np.einsum("ij,ij->i", d, d) <= self.radius**2 * (1 + 1e-12)

    def chord(self, x, u):
        d = np.asarray(x, dtype=float) - self.center
        uu = float(np.dot(u, u))
        if uu <= 0.0:
            raise BodyError("chord direction has zero norm")
        beta = float(np.dot(u, d)) / uu
        gamma = (float(np.dot(d, d)) - self.radius**2) / uu
        disc = beta * beta - gamma
        if disc < 0:
            if disc > -1e-12 * max(1.0, beta * beta):
                disc = 0.0
            else:
                raise BodyError("chord anchor outside ball")
        root = np.sqrt(disc)
        return (-beta - root, -beta + root)


class AxisCube(Body):
    """Axis-aligned cube [center - w, center + w]^n."""

    kind = "axis_cube"

    def __init__(self, n, half_width=1.0, center=None):
        if half_width <= 0:
            raise BodyError("half_width must be positive")
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        super().__init__(n, half_width, half_width * np.sqrt(n), center)
        self.half_width = float(half_width)
        self.center = center

    def contains(self, x):
        return bool(np.all(np.abs(x - self.center) <= self.half_width * (1 + 1e-12)))

    def contains_many(self, X):
        return np.all(np.abs(X - self.center) <= self.half_width * (1 + 1e-12), axis=1)

    def chord(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        d = x - self.center
        num = np.concatenate([self.half_width - d, self.half_width + d])
        den = np.concatenate([u, -u])
        return _interval_from_rows(num, den)


class Polytope(Body):
    """Halfspace intersection {x : A x <= b} with caller-supplied guarantees."""

    kind = "halfspace_polytope"

    def __init__(self, A, b, r, R, x0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise BodyError("A must be (m, n) with b of length m")
        super().__init__(A.shape[1], r, R, x0)
        if np.any(A @ self.x0 > b + 1e-12):
            raise BodyError("x0 is not inside the polytope")
        self.A = A
        self.b = b

    def contains(self, x):
        return bool(np.all(self.A @ x <= self.b + 1e-12))

    def contains_many(self, X):
        return np.all(X @ self.A.T <= self.b + 1e-12, axis=1)

    def chord(self, x, u):
        num = self.b - self.A @ np.asarray(x, dtype=float)
        den = self.A @ np.asarray(u, dtype=float)
        return _interval_from_rows(num, den)


def simplex(n):
    """Standard simplex {x >= 0, sum x <= 1} as a polytope.

    Guarantees: contains the ball of radius r = 1/(n + sqrt(n)*(n+1))
    around the centroid (a safe inscribed radius), R = diameter bound 1.
    """
    A = np.vstack([-np.eye(n), np.ones((1, n))])
    b = np.concatenate([np.zeros(n), [1.0]])
    x0 = np.full(n, 1.0 / (n + 1))
    # distance of centroid to each facet: 1/(n+1) to coordinate facets,
    # (1 - n/(n+1))/sqrt(n) to the diagonal facet.
    r = min(1.0 / (n + 1), 1.0 / ((n + 1) * np.sqrt(n)))
    R = 1.0
    return Polytope(A, b, r, R, x0)


def simplex_moments(n):
    """Exact mean and covariance of the uniform law on the standard simplex."""
    mean = np.full(n, 1.0 / (n + 1))
    c = 1.0 / ((n + 1) ** 2 * (n + 2))
    cov = -c * np.ones((n, n)) + (n + 1) * c * np.eye(n)
    return mean, cov


class Ellipsoid(Body):
    """{x : x^T E x <= 1} for a symmetric positive definite shape matrix E."""

    kind = "ellipsoid"

    def __init__(self, E):
        E = np.asarray(E, dtype=float)
        E = 0.5 * (E + E.T)
        evals = np.linalg.eigvalsh(E)
        if evals[0] <= 0:
            raise BodyError("shape matrix must be positive definite")
        n = E.shape[0]
        super().__init__(n, 1.0 / np.sqrt(evals[-1]), 1.0 / np.sqrt(evals[0]), np.zeros(n))
        self.E = E

    def contains(self, x):
        return float(x @ self.E @ x) <= 1 + 1e-12

    def contains_many(self, X):
        return np.einsum("ij,jk,ik->i", X, self.E, X) <= 1 + 1e-12

    def chord(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        a = float(u @ self.E @ u)
        bq = float(x @ self.E @ u)
        c = float(x @ self.E @ x) - 1.0
        if a <= 0:
            raise BodyError("degenerate ellipsoid direction")
        disc = bq * bq - a * c
        if disc < 0:
            disc = 0.0
        root = np.sqrt(disc)
        return ((-bq - root) / a, (-bq + root) / a)


class BallIntersection(Body):
    """base body intersected with a ball; the DFK phase bodies."""

    kind = "ball_intersection"

    def __init__(self, base, radius, center=None):
        center = base.x0 if center is None else np.asarray(center, dtype=float)
        self.ball = Ball(base.n, radius, center)
        # x0 of the base works whenever the ball is centered at it.
        if not (base.contains(center) and self.ball.contains(center)):
            raise BodyError("ball center must lie inside the base body")
        r = min(base.r, radius)
        R = min(base.R, radius)
        super().__init__(base.n, r, R, center)
        self.base = base

    def contains(self, x):
        return self.ball.contains(x) and self.base.contains(x)

    def contains_many(self, X):
        return self.ball.contains_many(X) & self.base.contains_many(X)

    def chord(self, x, u):
        lo1, hi1 = self.base.chord(x, u)
        lo2, hi2 = self.ball.chord(x, u)
        return (max(lo1, lo2), min(hi1, hi2))


class RestrictedBody(Body):
    """base body cut by extra halfspaces a_i . x <= b_i.

    Used by the cutting-plane driver and the needle decomposition, where
    cells accumulate cuts.  The inscribed-ball guarantee is lost (r = 0);
    callers track their own localization radius.
    """

    kind = "restricted"

    def __init__(self, base, A, b, x0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        super().__init__(base.n, 0.0, base.R, x0)
        if np.any(A @ self.x0 > b + 1e-9):
            raise BodyError("x0 violates a restriction halfspace")
        if not base.contains(self.x0):
            raise BodyError("x0 outside the base body")
        self.base = base
        self.A = A
        self.b = b

    def with_cut(self, a, beta, x0):
        A = np.vstack([self.A, np.asarray(a, dtype=float)])
        b = np.concatenate([self.b, [float(beta)]])
        return RestrictedBody(self.base, A, b, x0)

    def contains(self, x):
        return self.base.contains(x) and bool(np.all(self.A @ x <= self.b + 1e-12))

    def contains_many(self, X):
        return self.base.contains_many(X) & np.all(X @ self.A.T <= self.b + 1e-12, axis=1)

    def chord(self, x, u):
        lo1, hi1 = self.base.chord(x, u)
        num = self.b - self.A @ np.asarray(x, dtype=float)
        den = self.A @ np.asarray(u, dtype=float)
        lo2, hi2 = _interval_from_rows(num, den)
        return (max(lo1, lo2), min(hi1, hi2))


class TransformedBody(Body):
    """Image of a base body under the affine map y = M x + shift."""

    kind = "transformed"

    def __init__(self, base, M, shift=None):
        M = np.asarray(M, dtype=float)
        shift = np.zeros(base.n) if shift is None else np.asarray(shift, dtype=float)
        svals = np.linalg.svd(M, compute_uv=False)
        if svals[-1] <= 0:
            raise BodyError("transform must be invertible")
        x0 = M @ base.x0 + shift
        super().__init__(base.n, base.r * svals[-1], base.R * svals[0], x0)
        self.base = base
        self.M = M
        self.shift = shift
        self._Minv = np.linalg.inv(M)

    def contains(self, x):
        return self.base.contains(self._Minv @ (np.asarray(x, dtype=float) - self.shift))

    def contains_many(self, X):
        return self.base.contains_many((X - self.shift) @ self._Minv.T)

    def chord(self, x, u):
        xb = self._Minv @ (np.asarray(x, dtype=float) - self.shift)
        v = self._Minv @ np.asarray(u, dtype=float)
        return self.base.chord(xb, v)


def transform_body(body, M, shift=None):
    """Affine image of a body, preserving the kind where that is exact.

    Ellipsoids stay ellipsoids under any invertible linear map; balls and
    cubes stay themselves under scalings (plus translation).  Everything
    else is wrapped.
    """
    M = np.asarray(M, dtype=float)
    shift = np.zeros(body.n) if shift is None else np.asarray(shift, dtype=float)
    if isinstance(body, Ellipsoid):
        Minv = np.linalg.inv(M)
        E_new = Minv.T @ body.E @ Minv
        if np.allclose(shift, 0.0):
            return Ellipsoid(E_new)
        return TransformedBody(body, M, shift)
    scalar = M.shape[0] == M.shape[1] and np.allclose(M, M[0, 0] * np.eye(M.shape[0]))
    if scalar and isinstance(body, Ball):
        return Ball(body.n, body.radius * abs(M[0, 0]), M @ body.center + shift)
    if scalar and isinstance(body, AxisCube):
        return AxisCube(body.n, body.half_width * abs(M[0, 0]), M @ body.center + shift)
    return TransformedBody(body, M, shift)
