"""Discrete-time simulator of the stochastic localization process.

The time-t density is the base density tilted by exp(c.x - x.Bx/2).  The
tilt evolves by an Euler-Maruyama step dc = C^{1/2} dW + C mu dt whose
drift needs the current mean, so every step re-estimates the mean and
covariance of the tilted density and tracks scalar observables of the
covariance (tr A^2, tr A^q, the operator norm, and the barrier value u).

Estimation runs on an ensemble of k inner Metropolis chains advanced a
few steps per time step; recent ensemble snapshots are pooled with
importance reweighting to the current tilt, which cuts the observable
noise well below what one snapshot of size k could give.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, ndtr
from scipy.stats import ncx2

from .bodies import BallIntersection
from .densities import Density, Gaussian, Tilted, WithBody
from .diagnostics import BallSet, HalfspaceSet
from .linalg import CovMatrix, SingularCovarianceError, stieltjes_u, sym_inv_sqrt
from .parallel import parallel_map
from .rng import RngStream, as_generator
from .walks import WalkError, default_delta, exact_sample, warm_start

__all__ = [
    "SlocError", "LocalizationState", "TrajectoryRecord", "ObservablePool",
    "sloc_init", "sloc_step", "sloc_run", "sloc_closed_form",
    "stieltjes_potential", "moment_inequality_check",
    "default_q", "default_h",
]

TRUNCATION_FACTOR = 10.0
MEASURE_WINDOW = (0.25, 0.75)
BALANCE_WINDOW = (0.25, 0.75)

stieltjes_potential = stieltjes_u


class SlocError(RuntimeError):
    """Runtime failure inside the localization simulator."""


def default_q(n):
    """Exponent for the heavier potential tr(A^q): 2*ceil(log n), >= 2."""
    return max(2, 2 * math.ceil(math.log(max(n, 2))))


def default_h(phi0):
    """Step size min(0.01, 0.1/sqrt(phi_0))."""
    return min(0.01, 0.1 / math.sqrt(max(phi0, 1e-12)))


# ---------------------------------------------------------------------------
# pooled observable estimation


class ObservablePool:
    """Sliding window of ensemble snapshots reweighted to the current tilt.

    A snapshot drawn under tilt (c_s, B_s) is reused under (c, B) with
    self-normalized weights exp((c - c_s).x - x.(B - B_s)x/2).  Snapshots
    combine in insertion order, each weighted by its effective sample
    size, and are skipped once the ESS falls under min_ess_frac of the
    snapshot size.  The freshest snapshot has unit weights, so the pool
    never goes empty.
    """

    def __init__(self, window=16, min_ess_frac=0.05):
        self.window = int(window)
        self.min_ess_frac = float(min_ess_frac)
        self.groups = []

    def push(self, c, B, X):
        self.groups.append((np.array(c, dtype=float),
                            np.array(B, dtype=float),
                            np.array(X, dtype=float)))
        if len(self.groups) > self.window:
            self.groups.pop(0)

    def estimate(self, c, B, tracked=()):
        """Pooled mean, covariance and tracked-set measures at tilt (c, B)."""
        n = len(c)
        mu = np.zeros(n)
        second = np.zeros((n, n))
        g_acc = dict.fromkeys((name for name, _ in tracked), 0.0)
        total = 0.0
        ess_total = 0.0
        def group_weights(c_s, B_s, X):
            logw = X @ (c - c_s)
            dB = B - B_s
            if np.any(dB):
                logw -= 0.5 * np.einsum("ij,jk,ik->i", X, dB, X)
            logw -= logw.max()
            w = np.exp(logw)
            w /= w.sum()
            return w, 1.0 / float(w @ w)

        kept = []
        for c_s, B_s, X in self.groups:
            w, ess = group_weights(c_s, B_s, X)
            if ess < self.min_ess_frac * len(X):
                continue
            kept.append((X, w, ess))
        if not kept:
            # degenerate query far from every snapshot: fall back to the
            # freshest one so the pool never returns an empty estimate
            c_s, B_s, X = self.groups[-1]
            w, ess = group_weights(c_s, B_s, X)
            kept = [(X, w, ess)]
        for X, w, ess in kept:
            mu += ess * (w @ X)
            second += ess * (X.T @ (X * w[:, None]))
            for name, E in tracked:
                inside = E.signed_distance(X) >= 0.0
                g_acc[name] += ess * float(w @ inside)
            total += ess
            ess_total += ess
        mu /= total
        second /= total
        cov = CovMatrix(second - np.outer(mu, mu))
        g = {}
        for name, acc in g_acc.items():
            val = acc / total
            se = math.sqrt(max(val * (1.0 - val), 0.0) / ess_total)
            g[name] = (val, se)
        return mu, cov, g, ess_total


def _batch_ball_points(gen, m, n):
    g = gen.standard_normal((m, n))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0
    rad = gen.random(m) ** (1.0 / n)
    return g * (rad / norms)[:, None]


def _advance_ensemble(density, X, logf, steps, delta, gen):
    """Batched Metropolis ball-walk steps on every chain of the ensemble."""
    m, n = X.shape
    accepted = 0
    for _ in range(steps):
        Y = X + delta * _batch_ball_points(gen, m, n)
        logf_y = density.log_density_many(Y)
        with np.errstate(divide="ignore"):
            take = np.log(gen.random(m)) < (logf_y - logf)
        if take.any():
            X[take] = Y[take]
            logf[take] = logf_y[take]
        accepted += int(take.sum())
    return accepted / float(steps * m)


def _tune_inner_delta(state, gen, rounds=12, target=(0.25, 0.5)):
    """Grow or shrink the inner proposal radius until the Metropolis
    acceptance rate is useful.

    The conservative chain default 1/sqrt(n) mixes far too slowly on
    smooth targets: successive pool snapshots stay nearly identical and
    the pooled covariance never beats single-ensemble noise.
    """
    lo, hi = target
    for _ in range(rounds):
        rate = _advance_ensemble(state.density, state.ensemble,
                                 state.log_ensemble, 4, state.delta, gen)
        if rate > hi:
            state.delta *= 1.5
        elif rate < lo:
            state.delta *= 0.7
        else:
            break


# ---------------------------------------------------------------------------
# state


@dataclass
class LocalizationState:
    base: Density            # working base density (support may be truncated)
    control: str
    q: int
    k: int
    t: float
    c: np.ndarray
    B: np.ndarray
    mean: np.ndarray
    cov: CovMatrix
    phi: float
    phi_q: float
    u: float
    tracked: list
    g: dict
    g_se: dict
    accept_rate: float
    density: Density         # current tilted density
    closed_form: bool = False
    pool: ObservablePool = None
    ensemble: np.ndarray = None
    log_ensemble: np.ndarray = None
    inner_steps: int = 8
    delta: float = 0.0
    truncation: dict = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.base.n

    @property
    def opnorm(self):
        return self.cov.opnorm

    def check_invariants(self, tol=1e-8):
        """Barrier and potential consistency checks; raises on violation."""
        lam = self.cov.eigvals
        if abs(self.phi - float(np.sum(lam ** 2))) > 1e-10 * max(1.0, self.phi):
            raise SlocError("cached phi disagrees with eigenvalues")
        if self.u <= self.cov.opnorm:
            raise SlocError("barrier value u is not above the operator norm")
        resid = float(np.sum((self.u - lam) ** -2.0)) - self.n
        if abs(resid) > max(tol, 1e-8 * self.n):
            raise SlocError(f"barrier equation residual {resid:g}")
        if self.control == "identity":
            if np.max(np.abs(self.B - self.t * np.eye(self.n))) > 1e-12 * max(1.0, self.t):
                raise SlocError("identity control requires B = t*I")


def _normalize_tracked(tracked_sets):
    if not tracked_sets:
        return []
    if isinstance(tracked_sets, dict):
        pairs = list(tracked_sets.items())
    else:
        pairs = []
        for i, item in enumerate(tracked_sets):
            if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
                pairs.append(item)
            else:
                pairs.append((f"E{i}", item))
    for name, E in pairs:
        if not isinstance(E, (HalfspaceSet, BallSet)):
            raise ValueError(f"tracked set {name!r} must be a halfspace or a ball")
    return pairs


def _gaussian_set_measure(mean, var, E):
    """Measure of a halfspace or ball under N(mean, var*I)."""
    sd = math.sqrt(var)
    if isinstance(E, HalfspaceSet):
        return float(ndtr((E.s - float(E.u @ mean)) / sd))
    if isinstance(E, BallSet):
        nc = float(np.sum((mean - E.center) ** 2)) / var
        return float(ncx2.cdf(E.rho ** 2 / var, df=len(mean), nc=nc))
    raise ValueError("closed-form measures support halfspaces and balls only")


def _truncate_support(density, radius):
    """Intersect the support with a centered ball; returns (density, info).

    The tail mass bound is exact-family only for Gaussian bases; other
    kinds record None and rely on the radius being generous.
    """
    body = density.body
    if body.R <= radius:
        return density, None
    center = body.x0
    new_body = BallIntersection(body, radius, center=center)
    bound = None
    if isinstance(density, Gaussian):
        # |x - center|^2 is chi-square_n / a under N(center, I/a)
        gap = radius - float(np.linalg.norm(density.center - center))
        if gap > 0:
            bound = float(gammaincc(body.n / 2.0, 0.5 * density.a * gap * gap))
    return WithBody(density, new_body), {"radius": radius, "mass_bound": bound}


def _refresh_estimates(state, gen):
    # proposal radius tracks the shrinking target so acceptance stays useful
    delta = state.delta * math.sqrt(min(1.0, max(state.cov.opnorm, 1e-12)))
    rate = _advance_ensemble(state.density, state.ensemble, state.log_ensemble,
                             state.inner_steps, delta, gen)
    state.pool.push(state.c, state.B, state.ensemble)
    mu, cov, g, ess = state.pool.estimate(state.c, state.B, state.tracked)
    state.mean = mu
    state.cov = cov
    state.phi = cov.trace_sq
    state.phi_q = cov.trace_power(state.q)
    state.u = stieltjes_u(cov)
    state.g = {name: val for name, (val, _) in g.items()}
    state.g_se = {name: se for name, (_, se) in g.items()}
    state.accept_rate = rate
    state.meta["pool_ess"] = ess


def _refresh_closed_form(state):
    n = state.n
    var = 1.0 / (1.0 + state.t)
    state.mean = state.c * var
    state.cov = CovMatrix(var * np.eye(n))
    state.phi = n * var * var
    state.phi_q = n * var ** state.q
    state.u = var + 1.0
    state.g = {name: _gaussian_set_measure(state.mean, var, E)
               for name, E in state.tracked}
    state.g_se = dict.fromkeys(state.g, 0.0)
    state.accept_rate = 1.0


def sloc_init(density, control="identity", tracked_sets=None, q=None, k=None,
              rng=None, inner_steps=8, window=16, init_refreshes=8,
              delta=None, truncation_radius=None, closed_form=False):
    """State at t=0: zero tilt, observables estimated from the base density.

    closed_form=True requires a standard-Gaussian base with identity
    control; mean and covariance are then supplied analytically and no
    inner sampler runs (this mode is the discretization oracle).
    """
    if control not in ("identity", "inverse_sqrt_cov"):
        raise ValueError(f"unknown control kind {control!r}")
    tracked = _normalize_tracked(tracked_sets)
    n = density.n
    q = default_q(n) if q is None else int(q)
    if q < 2:
        raise ValueError("potential exponent q must be >= 2")
    k = 64 * n if k is None else int(k)

    if closed_form:
        if not (isinstance(density, Gaussian) and density.a == 1.0
                and not np.any(density.center)):
            raise ValueError("closed-form mode needs a standard-Gaussian base")
        if control != "identity":
            raise ValueError("closed-form mode needs the identity control")
        state = LocalizationState(
            base=density, control=control, q=q, k=k, t=0.0,
            c=np.zeros(n), B=np.zeros((n, n)),
            mean=np.zeros(n), cov=CovMatrix(np.eye(n)),
            phi=float(n), phi_q=float(n), u=2.0,
            tracked=tracked, g={}, g_se={}, accept_rate=1.0,
            density=density, closed_form=True)
        _refresh_closed_form(state)
        _validate_measures(state)
        return state

    gen = as_generator(rng)
    radius = TRUNCATION_FACTOR * math.sqrt(n) if truncation_radius is None \
        else float(truncation_radius)
    work, truncation = _truncate_support(density, radius)

    try:
        X = exact_sample(work, k, gen)
    except (WalkError, ValueError):
        x0 = warm_start(work, gen)
        X = np.tile(x0, (k, 1))
    X = np.array(X, dtype=float)
    logf = work.log_density_many(X)
    if not np.all(np.isfinite(logf)):
        raise SlocError("initial ensemble contains points outside the support")

    state = LocalizationState(
        base=work, control=control, q=q, k=k, t=0.0,
        c=np.zeros(n), B=np.zeros((n, n)),
        mean=np.zeros(n), cov=CovMatrix(np.eye(n)),
        phi=float(n), phi_q=float(n), u=2.0,
        tracked=tracked, g={}, g_se={}, accept_rate=1.0,
        density=work, pool=ObservablePool(window=window),
        ensemble=X, log_ensemble=logf,
        inner_steps=int(inner_steps),
        delta=default_delta(n) if delta is None else float(delta),
        truncation=truncation)
    if delta is None:
        _tune_inner_delta(state, gen)
    for _ in range(max(1, int(init_refreshes))):
        rate = _advance_ensemble(state.density, state.ensemble,
                                 state.log_ensemble, state.inner_steps,
                                 state.delta, gen)
        state.pool.push(state.c, state.B, state.ensemble)
    mu, cov, g, ess = state.pool.estimate(state.c, state.B, state.tracked)
    state.mean = mu
    state.cov = cov
    state.phi = cov.trace_sq
    state.phi_q = cov.trace_power(q)
    state.u = stieltjes_u(cov)
    state.g = {name: val for name, (val, _) in g.items()}
    state.g_se = {name: se for name, (_, se) in g.items()}
    state.accept_rate = rate
    state.meta["pool_ess"] = ess
    _validate_measures(state)
    return state


def _validate_measures(state):
    lo, hi = MEASURE_WINDOW
    for name, _ in state.tracked:
        val = state.g[name]
        if not (lo <= val <= hi):
            raise ValueError(
                f"tracked set {name!r} has initial measure {val:.3f}, "
                f"outside [{lo}, {hi}]")


def sloc_step(state, h, rng, noise=None):
    """One Euler-Maruyama step; mutates and returns the state.

    noise overrides the Gaussian increment (zero vector isolates the
    deterministic drift for tests).
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    gen = as_generator(rng)
    n = state.n
    if noise is None:
        gvec = gen.standard_normal(n)
    else:
        gvec = np.asarray(noise, dtype=float).reshape(n)
    sqh = math.sqrt(h)
    if state.control == "identity":
        state.c = state.c + sqh * gvec + h * state.mean
        state.B = state.B + h * np.eye(n)
    else:
        try:
            inv_sqrt = sym_inv_sqrt(state.cov.matrix)
        except SingularCovarianceError as exc:
            raise SlocError(
                f"covariance estimate is singular under inverse_sqrt_cov "
                f"control ({exc}); increase k") from exc
        inv = inv_sqrt @ inv_sqrt
        state.c = state.c + sqh * (inv_sqrt @ gvec) + h * (inv @ state.mean)
        state.B = state.B + h * inv
    state.t += h
    if state.closed_form:
        _refresh_closed_form(state)
    else:
        state.density = Tilted(state.base, state.c, state.B)
        _refresh_estimates(state, gen)
    return state


def sloc_closed_form(t, c):
    """Mean and covariance of p_t for a standard-Gaussian base.

    Completing the square in exp(c.x - t|x|^2/2 - |x|^2/2) gives
    p_t = N(c/(1+t), I/(1+t)).
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise ValueError("tilt c must be a vector")
    if t < 0:
        raise ValueError("time must be nonnegative")
    var = 1.0 / (1.0 + t)
    return c * var, var * np.eye(len(c))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    run: int
    set_names: list
    t: np.ndarray
    phi: np.ndarray
    phi_q: np.ndarray
    opnorm: np.ndarray
    u: np.ndarray
    g: dict
    accept_rate: np.ndarray
    g_se: dict = None
    cov_list: list = None

    def columns(self):
        return (["run", "t", "phi", "phi_q", "opnorm", "u"]
                + [f"g_{name}" for name in self.set_names]
                + ["accept_rate"])

    def rows(self):
        for i in range(len(self.t)):
            yield ([self.run, self.t[i], self.phi[i], self.phi_q[i],
                    self.opnorm[i], self.u[i]]
                   + [self.g[name][i] for name in self.set_names]
                   + [self.accept_rate[i]])


def _single_run(density, run_idx, stream, T, h, n_steps, record_every,
                init_kwargs, keep_cov):
    gen = stream.generator()
    state = sloc_init(density, rng=gen, **init_kwargs)
    names = [name for name, _ in state.tracked]
    rows = {key: [] for key in ("t", "phi", "phi_q", "opnorm", "u", "acc")}
    g_rows = {name: [] for name in names}
    g_se_rows = {name: [] for name in names}
    covs = [] if keep_cov else None

    def record():
        rows["t"].append(state.t)
        rows["phi"].append(state.phi)
        rows["phi_q"].append(state.phi_q)
        rows["opnorm"].append(state.cov.opnorm)
        rows["u"].append(state.u)
        rows["acc"].append(state.accept_rate)
        for name in names:
            g_rows[name].append(state.g[name])
            g_se_rows[name].append(state.g_se[name])
        if keep_cov:
            covs.append(state.cov.matrix.copy())

    record()
    for step in range(1, n_steps + 1):
        sloc_step(state, h, gen)
        if step % record_every == 0 or step == n_steps:
            record()
    return TrajectoryRecord(
        run=run_idx, set_names=names,
        t=np.array(rows["t"]), phi=np.array(rows["phi"]),
        phi_q=np.array(rows["phi_q"]), opnorm=np.array(rows["opnorm"]),
        u=np.array(rows["u"]),
        g={name: np.array(vals) for name, vals in g_rows.items()},
        accept_rate=np.array(rows["acc"]),
        g_se={name: np.array(vals) for name, vals in g_se_rows.items()},
        cov_list=covs)


def sloc_run(density, T, h=None, k=None, n_runs=1, tracked_sets=None,
             control="identity", q=None, rng=None, record_every=None,
             inner_steps=8, window=16, init_refreshes=8, closed_form=False,
             truncation_radius=None, threads=1, keep_cov=False):
    """n_runs independent trajectories plus an across-run summary.

    The summary reports, per tracked set, the martingale check
    (mean g_T vs g_0 in combined-se units) and the balance frequency
    (fraction of runs with g in [1/4, 3/4] at every recorded time),
    and the empirical quantiles of the potential ratios.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if isinstance(rng, RngStream):
        stream = rng
    elif rng is None:
        stream = RngStream(0)
    elif isinstance(rng, (int, np.integer)):
        stream = RngStream(int(rng))
    else:
        raise ValueError("sloc_run needs an RngStream or integer seed "
                         "to give runs disjoint substreams")
    init_kwargs = dict(control=control, tracked_sets=tracked_sets, q=q, k=k,
                       inner_steps=inner_steps, window=window,
                       init_refreshes=init_refreshes,
                       truncation_radius=truncation_radius,
                       closed_form=closed_form)

    if h is None:
        probe = sloc_init(density, rng=stream.substream(n_runs).generator(),
                          **init_kwargs)
        h = default_h(probe.phi)
    if h > T:
        h = T
    n_steps = max(1, int(math.ceil(T / h - 1e-9)))
    h_eff = T / n_steps
    if record_every is None:
        record_every = max(1, int(T / (100.0 * h_eff)))

    def one(args):
        idx, sub = args
        return _single_run(density, idx, sub, T, h_eff, n_steps,
                           record_every, init_kwargs, keep_cov)

    jobs = [(i, stream.substream(i)) for i in range(n_runs)]
    records = parallel_map(one, jobs, threads=threads)
    summary = _summarize_runs(records, T, h_eff, record_every, control)
    return records, summary


def _summarize_runs(records, T, h, record_every, control):
    n_runs = len(records)
    names = records[0].set_names
    summary = {
        "n_runs": n_runs, "T": T, "h": h, "record_every": record_every,
        "control": control,
        "phi0_mean": float(np.mean([r.phi[0] for r in records])),
        "phiT_mean": float(np.mean([r.phi[-1] for r in records])),
        "sets": {},
    }
    for key, attr in (("phi_ratio_quantiles", "phi"),
                      ("phi_q_ratio_quantiles", "phi_q")):
        ratios = np.array([getattr(r, attr)[-1] / getattr(r, attr)[0]
                           for r in records])
        summary[key] = {"q10": float(np.quantile(ratios, 0.10)),
                        "q50": float(np.quantile(ratios, 0.50)),
                        "q90": float(np.quantile(ratios, 0.90))}
    lo, hi = BALANCE_WINDOW
    all_balanced = np.ones(n_runs, dtype=bool)
    for name in names:
        G = np.stack([r.g[name] for r in records])        # runs x times
        g0 = G[:, 0]
        gT = G[:, -1]
        if n_runs > 1:
            se0 = float(np.std(g0, ddof=1) / math.sqrt(n_runs))
            seT = float(np.std(gT, ddof=1) / math.sqrt(n_runs))
            diff = G - g0[:, None]
            dev_se = np.std(diff, axis=0, ddof=1) / math.sqrt(n_runs)
            with np.errstate(invalid="ignore", divide="ignore"):
                dev_sigma = np.abs(diff.mean(axis=0)) / dev_se
            max_dev = float(np.nanmax(dev_sigma[1:])) if G.shape[1] > 1 else 0.0
        else:
            se0 = float(records[0].g_se[name][0])
            seT = float(records[0].g_se[name][-1])
            max_dev = float("nan")
        combined = math.sqrt(se0 ** 2 + seT ** 2)
        balanced = np.array([np.all((r.g[name] >= lo) & (r.g[name] <= hi))
                             for r in records])
        all_balanced &= balanced
        dev = abs(float(np.mean(gT)) - float(np.mean(g0)))
        summary["sets"][name] = {
            "g0_mean": float(np.mean(g0)), "g0_se": se0,
            "gT_mean": float(np.mean(gT)), "gT_se": seT,
            "combined_se": combined,
            "martingale_dev": dev,
            "martingale_ok": bool(dev <= 3.0 * combined) if combined > 0 else True,
            "max_dev_sigma": max_dev,
            "balance_frequency": float(np.mean(balanced)),
        }
    summary["balance_frequency_all"] = float(np.mean(all_balanced))
    return summary


# ---------------------------------------------------------------------------
# moment inequality checks


def moment_inequality_check(samples, k=3):
    """Empirical audit of three logconcave moment inequalities.

    (i)   E|x|^k <= (2k)^k (E|x|^2)^{k/2}            (pass/fail ratio)
    (ii)  E|<x~,y~>|^3 <= C tr(A^2)^{3/2}            (smallest empirical C)
    (iii) |E x~ (x~.A x~)| <= C' |A|_op^{1/2} tr(A^2) (conservative C')

    x~ denotes centered samples and A their empirical covariance.  (iii)
    reports (|v| + 5 se)/denominator: for symmetric targets the vector is
    pure noise and the se term keeps the constant stable across seeds.
    """
    if k not in (3, 4):
        raise ValueError("moment order k must be 3 or 4")
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise ValueError("samples must be an (m, n) array")
    m, n = X.shape
    if m < 8:
        raise ValueError("need at least 8 samples")

    norms_sq = np.sum(X * X, axis=1)
    lhs = float(np.mean(norms_sq ** (k / 2.0)))
    bound = (2.0 * k) ** k * float(np.mean(norms_sq)) ** (k / 2.0)
    norm_report = {"lhs": lhs, "bound": bound, "ratio": lhs / bound,
                   "ok": bool(lhs <= bound)}

    Xc = X - X.mean(axis=0)
    A = CovMatrix(Xc.T @ Xc / m)
    tr_a2 = A.trace_sq

    # all-pairs third moment of the inner product, blocked Gram rows
    row_sum = np.zeros(m)
    block = 256
    for a in range(0, m, block):
        b = min(a + block, m)
        G = np.abs(Xc[a:b] @ Xc.T) ** 3
        G[:, a:b][np.arange(b - a), np.arange(b - a)] = 0.0
        row_sum[a:b] += G.sum(axis=1)
    pair_mean = float(row_sum.sum() / (m * (m - 1)))
    row_means = row_sum / (m - 1)
    pair_se = 2.0 * float(np.std(row_means, ddof=1)) / math.sqrt(m)
    denom2 = tr_a2 ** 1.5
    pair_report = {"constant": pair_mean / denom2, "se": pair_se / denom2,
                   "ok": bool(np.isfinite(pair_mean / denom2))}

    quad = np.einsum("ij,jk,ik->i", Xc, A.matrix, Xc)
    W = Xc * quad[:, None]
    v = W.mean(axis=0)
    se_v = math.sqrt(float(np.sum(W.var(axis=0, ddof=1))) / m)
    denom3 = math.sqrt(A.opnorm) * tr_a2
    drift_report = {
        "norm": float(np.linalg.norm(v)),
        "se": se_v,
        "constant": (float(np.linalg.norm(v)) + 5.0 * se_v) / denom3,
        "ok": bool(np.isfinite(se_v / denom3)),
    }
    return {"m": m, "n": n, "k": k,
            "norm_moment": norm_report,
            "pair_third_moment": pair_report,
            "quadratic_drift": drift_report,
            "ok": bool(norm_report["ok"] and pair_report["ok"]
                       and drift_report["ok"])}
