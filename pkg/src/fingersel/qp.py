"""Convex relaxations of the cardinality-constrained finger-selection QP.

Every problem minimizes ``f(x) = x^T P x / nv - q^T x`` subject to
``sum(x) = M`` and one of

* the sphere through all binary points, ``x^T x - 1^T x <= 0``
  (equivalently ``||2x - 1||^2 <= L``), solved by a log-barrier method or
  through its two-variable Lagrange dual;
* the unit hypercube ``0 <= x <= 1``, solved by accelerated projected
  gradient.

Multiplier conventions: ``lam`` belongs to ``sum(x) = M`` and enters the
Lagrangian as ``lam * (1^T x - M)``; ``nu >= 0`` belongs to the sphere
constraint written as ``x^T x - 1^T x <= 0``; box multipliers ``lower`` and
``upper`` belong to ``-x <= 0`` and ``x - 1 <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space

__all__ = [
    "DEFAULT_TOL",
    "RelaxedProblem",
    "SphereDuals",
    "BoxDuals",
    "SolveReport",
    "SolverError",
    "default_reg",
    "project_capped_simplex",
    "kkt_residual",
    "recover_box_duals",
    "recover_sphere_duals",
    "dual_objective",
    "solve_sphere_qcqp",
    "solve_box_lcqp",
    "solve_sphere_dual",
]

DEFAULT_TOL = 1e-8


def default_reg(P: np.ndarray) -> float:
    """Ridge ``1e-8 * trace(P) / L``; ``1e-8`` when ``P`` vanishes."""
    tr = float(np.trace(P))
    return 1e-8 * tr / P.shape[0] if tr > 0 else 1e-8


@dataclass(frozen=True)
class RelaxedProblem:
    P: np.ndarray
    q: np.ndarray
    nv: float
    M: int
    reg: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if P.ndim != 2 or P.shape != (q.size, q.size):
            raise ValueError("P must be L x L and q of length L")
        if not 0 <= self.M <= q.size:
            raise ValueError("M must lie in [0, L]")
        if self.nv <= 0:
            raise ValueError("nv must be positive")
        if self.reg < 0:
            raise ValueError("reg must be nonnegative")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_qp(cls, qp, M: int, reg: float = 0.0) -> "RelaxedProblem":
        return cls(P=qp.P, q=qp.q, nv=qp.nv, M=M, reg=reg)

    @property
    def L(self) -> int:
        return self.q.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x / self.nv - self.q @ x)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * (self.P @ x) / self.nv - self.q


@dataclass(frozen=True)
class SphereDuals:
    lam: float
    nu: float


@dataclass(frozen=True)
class BoxDuals:
    lam: float
    lower: np.ndarray
    upper: np.ndarray


Duals = Union[SphereDuals, BoxDuals]


@dataclass
class SolveReport:
    """Outcome of one relaxation solve.

    ``objective`` is always ``f(x_star)`` on the unregularized problem.
    """

    x_star: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    dual_values: Optional[Duals] = None
    converged: bool = True
    regularized: bool = False
    dual_objective: Optional[float] = None
    history: list = field(default_factory=list, repr=False)
    message: str = ""


class SolverError(RuntimeError):
    """Raised when a solver exhausts its iteration budget.

    The best iterate is available as ``report``.
    """

    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


def project_capped_simplex(v, M: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x in [0,1]^L : sum(x) = M}``.

    The projection is ``clip(v - tau, 0, 1)`` for the shift ``tau`` at which
    the sum equals ``M``. The sum is piecewise linear and nonincreasing in
    ``tau`` with breakpoints ``v_i`` and ``v_i - 1``; the bracketing segment
    is found by bisection over the sorted breakpoints and ``tau`` is then
    solved for exactly on it. Cost is dominated by the sort.
    """
    v = np.asarray(v, dtype=float)
    L = v.size
    if not 0 <= M <= L:
        raise ValueError(f"M must lie in [0, {L}]")
    if M == L:
        return np.ones(L)
    if M == 0:
        return np.zeros(L)
    bps = np.sort(np.concatenate([v - 1.0, v]))

    def total(tau):
        return np.clip(v - tau, 0.0, 1.0).sum()

    # total(bps[0]) = L > M >= 0 = total(bps[-1]); find the first breakpoint
    # with total <= M
    lo, hi = 0, bps.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if total(bps[mid]) > M:
            lo = mid
        else:
            hi = mid
    t_lo, t_hi = bps[lo], bps[hi]
    s_lo, s_hi = total(t_lo), total(t_hi)
    if s_lo == s_hi:
        tau = t_hi
    else:
        # linear on [t_lo, t_hi]
        tau = t_lo + (s_lo - M) * (t_hi - t_lo) / (s_lo - s_hi)
    x = np.clip(v - tau, 0.0, 1.0)
    # absorb rounding in the sum on the free coordinates
    free = (x > 0.0) & (x < 1.0)
    if free.any():
        x[free] += (M - x.sum()) / free.sum()
        np.clip(x, 0.0, 1.0, out=x)
    return x


def _sphere_value(x: np.ndarray) -> float:
    return float(x @ x - x.sum())


def kkt_residual(prob: RelaxedProblem, x, duals: Duals) -> float:
    """Largest violation among the KKT conditions of the chosen relaxation.

    Covers stationarity (infinity norm), primal feasibility, dual
    feasibility and complementary slackness. The relaxation is inferred from
    the type of ``duals``.
    """
    x = np.asarray(x, dtype=float)
    g = prob.gradient(x)
    parts = [abs(x.sum() - prob.M)]
    if isinstance(duals, SphereDuals):
        s = _sphere_value(x)
        stat = g + duals.lam + duals.nu * (2.0 * x - 1.0)
        parts += [np.abs(stat).max(), max(s, 0.0), max(-duals.nu, 0.0), abs(duals.nu * s)]
    elif isinstance(duals, BoxDuals):
        lo = np.asarray(duals.lower, dtype=float)
        up = np.asarray(duals.upper, dtype=float)
        stat = g + duals.lam - lo + up
        parts += [
            np.abs(stat).max(),
            np.maximum(-x, 0.0).max(),
            np.maximum(x - 1.0, 0.0).max(),
            np.maximum(-lo, 0.0).max(),
            np.maximum(-up, 0.0).max(),
            np.abs(lo * x).max(),
            np.abs(up * (1.0 - x)).max(),
        ]
    else:
        raise TypeError(f"unsupported duals {type(duals).__name__}")
    return float(max(parts))


def recover_box_duals(prob: RelaxedProblem, x, active_tol: float = 0.0) -> BoxDuals:
    """Multipliers that best certify ``x`` for the hypercube relaxation.

    Coordinates within ``active_tol`` of a bound are treated as active. The
    equality multiplier minimizes the worst stationarity/sign violation, a
    one-dimensional piecewise-linear problem solved in closed form; bound
    multipliers then absorb the remaining gradient on active coordinates.
    """
    x = np.asarray(x, dtype=float)
    minus_g = -prob.gradient(x)
    at_lo = x <= active_tol
    at_up = (x >= 1.0 - active_tol) & ~at_lo
    # free: lam == -g_i; at lower: lam >= -g_i; at upper: lam <= -g_i
    lb = minus_g[~at_up]
    ub = minus_g[~at_lo]
    if lb.size and ub.size:
        lam = 0.5 * (lb.max() + ub.min())
    elif lb.size:
        lam = lb.max()
    else:
        lam = ub.min()
    r = lam - minus_g  # g + lam
    lower = np.where(at_lo, np.maximum(r, 0.0), 0.0)
    upper = np.where(at_up, np.maximum(-r, 0.0), 0.0)
    return BoxDuals(lam=float(lam), lower=lower, upper=upper)


def recover_sphere_duals(prob: RelaxedProblem, x) -> SphereDuals:
    """Least-squares multipliers for the sphere relaxation at ``x``."""
    x = np.asarray(x, dtype=float)
    g = prob.gradient(x)
    d = 2.0 * x - 1.0
    # fix nu, lam = -mean(g + nu d); minimize over nu >= 0
    gc = g - g.mean()
    dc = d - d.mean()
    dd = dc @ dc
    nu = max(-(gc @ dc) / dd, 0.0) if dd > 0 else 0.0
    lam = -float(np.mean(g + nu * d))
    return SphereDuals(lam=lam, nu=float(nu))


def _finish(prob, x, duals, iterations, **kw) -> SolveReport:
    return SolveReport(
        x_star=x,
        objective=prob.objective(x),
        kkt_residual=kkt_residual(prob, x, duals),
        iterations=iterations,
        dual_values=duals,
        **kw,
    )


# --------------------------------------------------------------------------
# sphere relaxation: log barrier


class _ReducedSphere:
    """Sphere relaxation restricted to the hyperplane ``sum(x) = M``.

    With ``x = c + Z y``, ``c = (M/L) 1`` and ``Z`` an orthonormal basis of
    ``1^perp``, the problem becomes ``min y^T A y + b^T y`` over the ball
    ``||y||^2 <= r2`` with ``r2 = M (L - M) / L``; the sphere multiplier is
    unchanged by the substitution.
    """

    def __init__(self, prob: RelaxedProblem):
        L, M = prob.L, prob.M
        Q = prob.P / prob.nv
        self.c = np.full(L, M / L)
        self.Z = null_space(np.ones((1, L)))
        A = self.Z.T @ Q @ self.Z
        self.A = 0.5 * (A + A.T)
        self.b = self.Z.T @ (2.0 * Q @ self.c - prob.q)
        self.r2 = M * (L - M) / L
        self._eig = None

    def x(self, y):
        return self.c + self.Z @ y

    def eig(self):
        if self._eig is None:
            w, U = np.linalg.eigh(self.A)
            self._eig = (w, U, U.T @ self.b)
        return self._eig

    def refine(self, nu_hint: float):
        """Solve the reduced KKT system exactly in the eigenbasis.

        Returns ``(y, nu)`` or ``None`` when the secular equation cannot be
        bracketed (degenerate "hard case").
        """
        w, U, bh = self.eig()
        scale = max(1.0, np.abs(w).max())
        zero = w <= 1e-13 * scale
        r = math.sqrt(self.r2)
        if np.all(np.abs(bh[zero]) <= 1e-13 * (1.0 + np.abs(bh).max())):
            yh = np.zeros_like(bh)
            yh[~zero] = -0.5 * bh[~zero] / w[~zero]
            if yh @ yh <= self.r2:
                return U @ yh, 0.0

        def norm_y(nu):
            return 0.5 * math.sqrt(np.sum((bh / (w + nu)) ** 2))

        lo = max(0.0, -w.min())
        if lo > 0 or np.any(zero):
            lo = lo + 0.0
        hi = max(nu_hint, 1e-12 * scale, lo * 2.0 + 1e-300)
        while norm_y(hi) > r:
            hi *= 2.0
            if hi > 1e300:
                return None
        nu = min(max(nu_hint, lo), hi)
        if nu <= lo:
            nu = 0.5 * (lo + hi)
        for _ in range(200):
            ny = norm_y(nu)
            if ny > r:
                lo = nu
            else:
                hi = nu
            # Newton on 1/r - 1/||y(nu)||, which is close to linear in nu
            dn = -0.5 * np.sum(bh**2 / (w + nu) ** 3) / ny
            psi = 1.0 / r - 1.0 / ny
            nu_new = nu - psi / (dn / ny**2)
            if not (lo < nu_new < hi):
                nu_new = 0.5 * (lo + hi)
            if abs(nu_new - nu) <= 4e-16 * max(1.0, nu):
                nu = nu_new
                break
            nu = nu_new
        yh = -0.5 * bh / (w + nu)
        return U @ yh, float(nu)


def _sphere_certificate(prob, x, nu):
    g = prob.gradient(x) + nu * (2.0 * x - 1.0)
    duals = SphereDuals(lam=-float(g.mean()), nu=float(nu))
    res = kkt_residual(prob, x, duals)
    alt = recover_sphere_duals(prob, x)
    res_alt = kkt_residual(prob, x, alt)
    if res_alt < res:
        return alt, res_alt
    return duals, res


def solve_sphere_qcqp(
    prob: RelaxedProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = 500,
    mu: float = 10.0,
) -> SolveReport:
    """Barrier method for the sphere relaxation.

    The equality constraint is eliminated first (see ``_ReducedSphere``).
    Each centering step minimizes ``t f - log(r2 - ||y||^2)`` by damped
    Newton, with the rank-one barrier curvature handled by Sherman-Morrison;
    ``t`` grows by ``mu`` between centerings. After each centering, the KKT
    conditions are also solved exactly starting from the barrier multiplier
    estimate, and whichever point certifies better is kept. Stops once the
    KKT residual is below ``tol``.

    Raises
    ------
    SolverError
        If ``max_iter`` Newton steps do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    L, M = prob.L, prob.M
    if M in (0, L):
        # the feasible set is a single point; no interior exists
        x = np.full(L, float(M == L))
        return SolveReport(
            x_star=x,
            objective=prob.objective(x),
            kkt_residual=abs(x.sum() - M),
            iterations=0,
            dual_values=recover_sphere_duals(prob, x),
            message="feasible set is a single point",
        )

    red = _ReducedSphere(prob)
    A, b, r2 = red.A, red.b, red.r2
    n = L - 1
    eye = np.eye(n)
    y = np.zeros(n)
    scale = 1.0 + np.abs(b).max() * math.sqrt(r2) + np.abs(A).sum(axis=1).max() * r2
    t = 1.0 / scale
    iters = 0
    best = None

    def phi(z):
        s = r2 - z @ z
        if s <= 0:
            return math.inf
        return t * (z @ A @ z + b @ z) - math.log(s)

    while True:
        while iters < max_iter:
            s = r2 - y @ y
            grad = t * (2.0 * A @ y + b) + 2.0 * y / s
            B = 2.0 * t * A + (2.0 / s) * eye
            cf = cho_factor(B)
            u = (2.0 / s) * y
            Bg = cho_solve(cf, grad)
            Bu = cho_solve(cf, u)
            dy = -(Bg - Bu * (u @ Bg) / (1.0 + u @ Bu))
            iters += 1
            dec = -grad @ dy
            if not np.isfinite(dec) or dec <= 1e-20:
                break
            # stay strictly inside the ball
            step = 1.0
            f0 = phi(y)
            while step > 1e-20:
                fn = phi(y + step * dy)
                if fn <= f0 - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            y = y + step * dy
            if 0.5 * dec <= 1e-12:
                break
        s = r2 - y @ y
        x = red.x(y)
        duals, res = _sphere_certificate(prob, x, 1.0 / (t * s))
        cand = [(x, duals, res)]
        ref = red.refine(duals.nu)
        if ref is not None:
            xr = red.x(ref[0])
            dr, rr = _sphere_certificate(prob, xr, ref[1])
            cand.append((xr, dr, rr))
        for cx, cd, cr in cand:
            if best is None or cr < best[2]:
                best = (cx.copy(), cd, cr)
        if best[2] <= tol:
            return _finish(prob, best[0], best[1], iters)
        if iters >= max_iter or t > 1e20:
            rep = _finish(prob, best[0], best[1], iters, converged=False,
                          message="barrier method did not converge")
            raise SolverError(
                f"sphere QCQP: residual {best[2]:.3e} after {iters} Newton steps", rep
            )
        t *= mu


# --------------------------------------------------------------------------
# hypercube relaxation: accelerated projected gradient


def _power_lambda_max(P: np.ndarray, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the top eigenvalue of a PSD matrix.

    Never exceeds the true value; callers guard with backtracking.
    """
    v = np.random.default_rng(seed).standard_normal(P.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = P @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - est) <= 1e-10 * nw:
            return nw
        est = nw
    return est


def _box_face_step(prob: RelaxedProblem, x: np.ndarray, free=None):
    """Move from ``x`` toward the minimizer of its face of the box.

    Coordinates outside ``free`` (by default those exactly at 0 or 1) are
    frozen. On the remaining ones, restricted to ``sum(d) = 0``, the step is the Newton step on the
    curved part of the face; along flat directions with a nonzero gradient
    the objective is linear and the step is a descent ray instead. The step
    is cut at the first bound it crosses, so the convex objective cannot
    increase. Returns ``None`` when no progress is possible.
    """
    if free is None:
        free = (x > 0.0) & (x < 1.0)
    nf = int(free.sum())
    if nf < 2:
        return None
    Z = null_space(np.ones((1, nf)))
    H = Z.T @ (2.0 * prob.P[np.ix_(free, free)] / prob.nv) @ Z
    gr = Z.T @ prob.gradient(x)[free]
    w, U = np.linalg.eigh(0.5 * (H + H.T))
    gh = U.T @ gr
    flat = w <= 1e-12 * max(1.0, np.abs(w).max())
    if np.any(flat) and np.abs(gh[flat]).max() > 1e-14 * (1.0 + np.abs(gh).max()):
        dh = np.where(flat, -gh, 0.0)
        alpha_max = np.inf
    else:
        dh = np.where(flat, 0.0, -gh / np.where(flat, 1.0, w))
        alpha_max = 1.0
    d = Z @ (U @ dh)
    if not np.any(d):
        return None
    xf = x[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(d < 0, -xf / d, np.where(d > 0, (1.0 - xf) / d, np.inf))
    j = int(np.argmin(lim))
    alpha = min(alpha_max, float(lim[j]))
    if not np.isfinite(alpha):
        return None
    out = x.copy()
    out[free] = xf + alpha * d
    if alpha == lim[j]:
        out[free.nonzero()[0][j]] = 0.0 if d[j] < 0 else 1.0
    np.clip(out, 0.0, 1.0, out=out)
    if prob.objective(out) > prob.objective(x):
        return None
    return out


def _box_active_set(prob: RelaxedProblem, x: np.ndarray, max_steps: int) -> np.ndarray:
    """Primal active-set descent from a feasible ``x``.

    Takes face steps until the face minimizer is reached, then frees the
    bound whose multiplier has the wrong sign by the largest margin (and, at
    a vertex, the worst one on the opposite bound so the sum can move).
    The objective never increases. Returns the last point.
    """
    for _ in range(max_steps):
        fx = prob.objective(x)
        xn = _box_face_step(prob, x)
        if xn is None or prob.objective(xn) >= fx - 1e-15 * (1.0 + abs(fx)):
            free = (x > 0.0) & (x < 1.0)
            r = prob.gradient(x)
            r = r + (np.mean(-r[free]) if free.any() else recover_box_duals(prob, x).lam)
            lo_bad = np.where((x <= 0.0) & (r < 0.0), -r, 0.0)
            up_bad = np.where((x >= 1.0) & (r > 0.0), r, 0.0)
            if max(lo_bad.max(), up_bad.max()) <= 0.0:
                return x
            pick = free.copy()
            first, other = (lo_bad, up_bad) if lo_bad.max() >= up_bad.max() else (up_bad, lo_bad)
            pick[int(np.argmax(first))] = True
            if pick.sum() < 2 and other.max() > 0.0:
                pick[int(np.argmax(other))] = True
            xn = _box_face_step(prob, x, pick)
            if xn is None or prob.objective(xn) >= fx - 1e-15 * (1.0 + abs(fx)):
                return x
        x = xn
    return x


def solve_box_lcqp(
    prob: RelaxedProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = 5000,
    x0=None,
    refine_every: int = 10,
) -> SolveReport:
    """Accelerated projected gradient for the hypercube relaxation.

    The step is ``1/Lf`` with ``Lf = 2 lambda_max(P) / nv`` estimated by power
    iteration and doubled whenever the quadratic upper bound fails; momentum
    restarts whenever it points uphill. Every ``refine_every`` iterations a
    primal active-set phase starts from the current iterate (see
    ``_box_active_set``); it usually lands on the optimal face and ends the
    run with a residual near roundoff.

    Raises
    ------
    SolverError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    L, M = prob.L, prob.M
    P, q, nv = prob.P, prob.q, prob.nv
    lf = 2.0 * _power_lambda_max(P) / nv * 1.01
    lf = max(lf, 1e-12 * (1.0 + np.abs(q).max()))

    def f(z):
        return z @ P @ z / nv - q @ z

    x = project_capped_simplex(np.full(L, M / L) if x0 is None else x0, M)
    y = x.copy()
    theta = 1.0
    best = None

    def consider(z, it):
        nonlocal best
        duals = recover_box_duals(prob, z)
        res = kkt_residual(prob, z, duals)
        if best is None or res < best[1]:
            best = (z.copy(), res, duals)
        return res <= tol

    for it in range(1, max_iter + 1):
        gy = prob.gradient(y)
        fy = f(y)
        while True:
            xn = project_capped_simplex(y - gy / lf, M)
            d = xn - y
            if f(xn) <= fy + gy @ d + 0.5 * lf * (d @ d) + 1e-15 * abs(fy):
                break
            lf *= 2.0
        if consider(xn, it):
            return _finish(prob, best[0], best[2], it)
        if it % refine_every == 0:
            xf = _box_active_set(prob, xn, 2 * L)
            if xf is not xn:
                if consider(xf, it):
                    return _finish(prob, best[0], best[2], it)
                # restart momentum from the improved point
                x = y = xf
                theta = 1.0
                continue
        if (y - xn) @ (xn - x) > 0:
            theta = 1.0
            y = xn.copy()
        else:
            theta_n = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = xn + ((theta - 1.0) / theta_n) * (xn - x)
            theta = theta_n
        x = xn
    rep = _finish(prob, best[0], best[2], max_iter, converged=False,
                  message="projected gradient did not converge")
    raise SolverError(f"box LCQP: residual {best[1]:.3e} after {max_iter} iterations", rep)


# --------------------------------------------------------------------------
# sphere relaxation: Lagrange dual


class _SphereDual:
    """Dual of the sphere relaxation in the eigenbasis of ``P/nv + reg I``."""

    def __init__(self, prob: RelaxedProblem, reg: float):
        Q = (prob.P + reg * np.eye(prob.L)) / prob.nv
        w, V = np.linalg.eigh(0.5 * (Q + Q.T))
        self.w = w
        self.V = V
        self.qv = V.T @ prob.q
        self.u = V.T @ np.ones(prob.L)
        self.M = prob.M

    def value_grad(self, lam, nu):
        """Dual objective to minimize and its gradient in ``(lam, nu)``."""
        den = self.w + nu
        b = self.qv + (nu - lam) * self.u
        z = 0.5 * b / den  # V^T x
        h = 0.5 * b @ z + self.M * lam
        one_x = self.u @ z
        xx = z @ z
        return h, np.array([self.M - one_x, one_x - xx])

    def primal(self, lam, nu):
        return self.V @ (0.5 * (self.qv + (nu - lam) * self.u) / (self.w + nu))


def dual_objective(prob: RelaxedProblem, lam: float, nu: float, reg: float = 0.0) -> float:
    """Lagrange dual function ``g(lam, nu)`` of the sphere relaxation.

    Requires ``P/nv + (nu + reg/nv) I`` to be positive definite. By weak
    duality the value never exceeds the primal optimum of the problem with
    ``P + reg I``.
    """
    h, _ = _SphereDual(prob, reg).value_grad(lam, nu)
    return -float(h)


def solve_sphere_dual(
    prob: RelaxedProblem,
    tol: float = 1e-9,
    max_iter: int = 5000,
    memory: int = 10,
) -> SolveReport:
    """Projected gradient descent on the two-variable sphere dual.

    Minimizes ``1/4 b^T (P/nv + nu I)^{-1} b + M lam`` with
    ``b = q + (nu - lam) 1`` over ``lam`` free and ``nu >= 0``; every trial
    point has ``nu`` clamped to ``max(0, nu)``. Steps follow the safeguarded
    Barzilai-Borwein rule with nonmonotone Armijo backtracking over the last
    ``memory`` values. ``x_star`` is recovered from the stationarity of the
    Lagrangian, ``x = 1/2 (P/nv + nu I)^{-1} (q + (nu - lam) 1)``.

    When ``P/nv`` is numerically singular the ridge :func:`default_reg` (or
    ``prob.reg`` if set) is added to ``P`` and the report is flagged.
    ``tol`` bounds the projected dual gradient, whose components are the
    violations of ``sum(x) = M`` and of sphere complementary slackness,
    relative to ``1 + M``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    reg = prob.reg
    regularized = reg > 0
    if not regularized:
        wmin = np.linalg.eigvalsh(prob.P)[0]
        if wmin <= 1e-12 * max(1.0, np.abs(prob.P).max()):
            reg = default_reg(prob.P)
            regularized = True
    dual = _SphereDual(prob, reg)
    a_min, a_max = 1e-15, 1e15
    thresh = tol * (1.0 + prob.M)

    def proj(z):
        return np.array([z[0], max(z[1], 0.0)])

    z = np.array([0.0, 1.0])
    h, grad = dual.value_grad(*z)
    hist = [-h]
    alpha = 1.0 / max(1.0, np.abs(grad).max())
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = proj(z - grad) - z
        if np.abs(pg).max() <= thresh:
            converged = True
            break
        d = proj(z - alpha * grad) - z
        gd = grad @ d
        h_ref = -min(hist[-memory:])  # hist holds dual values -h
        step = 1.0
        while True:
            zn = z + step * d
            hn, gn = dual.value_grad(*zn)
            if hn <= h_ref + 1e-4 * step * gd or step < 1e-20:
                break
            step *= 0.5
        s_, y_ = zn - z, gn - grad
        sy = s_ @ y_
        alpha = min(a_max, max(a_min, (s_ @ s_) / sy)) if sy > 0 else a_max
        if not np.any(s_):
            break
        z, h, grad = zn, hn, gn
        hist.append(-h)

    lam, nu = float(z[0]), float(z[1])
    x = dual.primal(lam, nu)
    duals = SphereDuals(lam=lam, nu=nu)
    rep = _finish(
        prob,
        x,
        duals,
        it,
        converged=converged,
        regularized=regularized,
        dual_objective=-float(h),
        history=hist,
        message="regularized P" if regularized else "",
    )
    if not converged:
        raise SolverError(f"sphere dual: no convergence after {it} iterations", rep)
    return rep
