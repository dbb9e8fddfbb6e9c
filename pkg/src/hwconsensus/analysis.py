"""Post-hoc diagnostics and exact oracles over simulation logs.

Everything here is a pure function of an immutable TrajectoryLog plus the
static scenario objects (gains, topology). The centerpiece is the
centralized-replay oracle: relabeling the distributed run through its
truncation windows yields sequences that must satisfy a single expanding-
truncation recursion with an infinity-norm test, exactly. The replay here
reproduces the logged run to float precision and is used as the package's
main correctness check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import Schedule
from .errors import (
    BracketFailure,
    DimensionMismatch,
    IncompleteLog,
    StepNotLogged,
    ValidationError,
)
from .graph import LaplacianView, Topology, diameter, laplacian

INF = float("inf")


# ---------------------------------------------------------------------------
# the log

@dataclass
class TrajectoryLog:
    """Complete per-step record of one run.

    Row r (0-based) holds step k = r + 1: the estimate u_{i,k} and count
    sigma_{i,k} at the start of the round, the pooled count, the working
    estimate, the plant output y_{i,k+1} produced in the round, the
    aggregated observation O_{i,k+1}, and per directed edge the observed
    value z and its noise component. With log_stride > 1 the y/O/z/eps
    entries are NaN except on logged steps (k = 1, 1+stride, ...); u and
    sigma columns are always full.
    """

    n: int
    horizon: int
    log_stride: int
    pairs: list
    u: np.ndarray
    sigma: np.ndarray
    sigma_prime: np.ndarray
    u_prime: np.ndarray
    y_next: np.ndarray
    O_next: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    u_star: np.ndarray
    c_M: float
    label: str = ""
    scenario_hash: str = ""
    seed: int = 0

    @property
    def sigma_bar(self) -> np.ndarray:
        return self.sigma.max(axis=1)

    def is_logged(self, k: int) -> bool:
        return 1 <= k <= self.horizon and (k - 1) % self.log_stride == 0

    def is_complete(self) -> bool:
        return self.log_stride == 1 and self.horizon == self.u.shape[0]


@dataclass(frozen=True)
class TruncationTimes:
    """First-passage times of truncation counts, with inf for unattained.

    r[m] is the first step at which any agent's count reaches m (r[0] = 1);
    r_agent[m, i] the first step agent i does. Arrays run m = 0..top+1 where
    top is the largest count attained, so interval ends r[m+1] are always
    addressable.
    """

    top: int
    r: np.ndarray        # (top+2,) float
    r_agent: np.ndarray  # (top+2, n) float

    def rbar(self, m: int) -> np.ndarray:
        """Per-agent window end: min(r_agent[m], r[m+1])."""
        return np.minimum(self.r_agent[m], self.r[m + 1])


@dataclass
class AuxiliarySequences:
    """Windowed relabeling of a run plus its effective observation.

    Within each global window [r(m), r(m+1)), an agent that has not yet
    reached count m is represented by its reset point with zero effective
    observation; once it reaches m it is represented by its true values.
    structure_max_err bounds |g(ubar) + ebar - expected| over live steps
    (the catch-up side cancels exactly by construction).
    """

    ubar: np.ndarray
    ebar: np.ndarray
    obar: np.ndarray
    sigma_bar: np.ndarray
    times: TruncationTimes
    u_star: np.ndarray
    c_M: float
    catchup_mask: np.ndarray = field(default=None)
    structure_max_err: float = 0.0


# ---------------------------------------------------------------------------
# regression field and noise decomposition

def regression_g(u: np.ndarray, gains, lap: LaplacianView) -> np.ndarray:
    """Consensus vector field g_i = sum_j p_ij (h_j(u_j) - h_i(u_i)).

    Computed by the neighbor-sum route and cross-checked against the matrix
    route -L h(u); a disagreement beyond 1e-12 raises, since the two must be
    algebraically identical.
    """
    u = np.asarray(u, dtype=float)
    n = lap.L.shape[0]
    if u.shape != (n,) or len(gains) != n:
        raise DimensionMismatch(
            f"u shape {u.shape}, {len(gains)} gains, Laplacian {lap.L.shape}")
    h = np.array([gains[i](u[i]) for i in range(n)])
    g = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            w = lap.P[i, j]
            if w != 0.0:
                acc += w * (h[j] - h[i])
        g[i] = acc
    g_mat = -(lap.L @ h)
    err = float(np.max(np.abs(g - g_mat)))
    scale = max(1.0, float(np.max(np.abs(h))))
    if err > 1e-12 * scale:
        raise RuntimeError(f"regression field routes disagree by {err}")
    return g


def noise_decomposition(log: TrajectoryLog, k: int, i: int, gains,
                        lap: LaplacianView) -> tuple[float, float, float]:
    """Split O_{i,k+1} - g_i(u_k) into noise, own-transient, neighbor-transient.

    e1 = sum_j p_ij eps_ij           (pure observation noise)
    e2 = p_i (h_i(u_{i,k}) - y_{i,k+1})   (own output off steady state)
    e3 = sum_j p_ij (y_{j,k+1} - h_j(u_{j,k}))
    The three must sum to O - g within 1e-10.
    """
    if not log.is_logged(k):
        raise StepNotLogged(f"step {k} not in the log (stride {log.log_stride})")
    r = k - 1
    if np.isnan(log.y_next[r]).any():
        raise StepNotLogged(f"step {k} has no output record")
    ii = i - 1
    e1 = 0.0
    e3 = 0.0
    for col, (a, b) in enumerate(log.pairs):
        if a == i:
            w = lap.P[ii, b - 1]
            e1 += w * log.eps[r, col]
            e3 += w * (log.y_next[r, b - 1] - gains[b - 1](log.u[r, b - 1]))
    p_i = float(lap.D[ii, ii])
    e2 = p_i * (gains[ii](log.u[r, ii]) - log.y_next[r, ii])
    g = regression_g(log.u[r], gains, lap)[ii]
    lhs = e1 + e2 + e3
    rhs = log.O_next[r, ii] - g
    if abs(lhs - rhs) > 1e-10 * max(1.0, abs(rhs)):
        raise RuntimeError(
            f"decomposition identity violated at k={k}, agent {i}: {lhs} vs {rhs}")
    return e1, e2, e3


# ---------------------------------------------------------------------------
# truncation windows

def truncation_times(log: TrajectoryLog) -> TruncationTimes:
    """First-passage tables of the logged truncation counts."""
    sig = log.sigma
    K, n = sig.shape
    sbar = log.sigma_bar
    top = int(sbar.max())
    r = np.full(top + 2, INF)
    r_agent = np.full((top + 2, n), INF)
    r[0] = 1.0
    r_agent[0] = 1.0
    for m in range(1, top + 1):
        idx = int(np.argmax(sbar >= m))
        r[m] = idx + 1 if sbar[idx] >= m else INF
        for i in range(n):
            w = int(np.argmax(sig[:, i] >= m))
            r_agent[m, i] = w + 1 if sig[w, i] >= m else INF
    return TruncationTimes(top=top, r=r, r_agent=r_agent)


def check_window_bound(times: TruncationTimes, d: int, horizon: int) -> bool:
    """Every agent reaches an attained count within d steps of its first reach.

    An agent that never reaches an attained level is only excused when the
    run ended inside the allowed window (r[m] + d > horizon).
    """
    for m in range(1, times.top + 1):
        rm = times.r[m]
        if not math.isfinite(rm):
            continue
        for ri in times.r_agent[m]:
            if math.isfinite(ri):
                if not (0 <= ri - rm <= d):
                    return False
            elif rm + d <= horizon:
                return False
    return True


# ---------------------------------------------------------------------------
# step-window count m(k, T)

def m_of(k: int, T: float) -> int:
    """Largest m with 1/k + ... + 1/m <= T, by direct compensated summation.

    Returns k - 1 when even the first term exceeds T (degenerate window).
    The exponential sandwich (k-1) e^T - 1 < m < k e^T - 1 is asserted on
    every call; it holds in the degenerate branch too.
    """
    if k < 1 or not T > 0:
        raise ValidationError(f"need k >= 1 and T > 0, got k={k}, T={T}")
    s = 0.0
    comp = 0.0
    m = k - 1
    nxt = k
    while True:
        term = 1.0 / nxt
        t = s + term
        if abs(s) >= term:
            comp += (s - t) + term
        else:
            comp += (term - t) + s
        s = t
        if s + comp <= T:
            m = nxt
            nxt += 1
        else:
            break
    lo = (k - 1) * math.exp(T) - 1.0
    hi = k * math.exp(T) - 1.0
    assert lo < m < hi, f"window bound violated: {lo} < {m} < {hi} at k={k}, T={T}"
    return m


# ---------------------------------------------------------------------------
# auxiliary sequences and the centralized replay

def build_auxiliary(log: TrajectoryLog, gains, topology: Topology) -> AuxiliarySequences:
    """Relabel a complete stride-1 log through its truncation windows.

    ubar equals the reset point during an agent's catch-up window
    [r(m), min(r_agent(m), r(m+1))) and the true estimate elsewhere; ebar is
    the effective noise making g(ubar) + ebar equal 0 on catch-up windows
    and the logged observation on live windows. obar stores that structural
    value; the float discrepancy of the live-side identity is recorded in
    structure_max_err (the catch-up side cancels exactly by construction).
    """
    if not log.is_complete() or np.isnan(log.y_next).any():
        raise IncompleteLog("auxiliary sequences need a complete stride-1 log")
    K, n = log.u.shape
    lap = laplacian(topology)
    times = truncation_times(log)
    sbar = log.sigma_bar

    ubar = log.u.copy()
    catchup = np.zeros((K, n), dtype=bool)
    for m in range(0, times.top + 1):
        lo = times.r[m]
        if not math.isfinite(lo):
            continue
        lo = int(lo)
        hi_global = times.r[m + 1] if m + 1 < len(times.r) else INF
        for i in range(n):
            rb = min(times.r_agent[m, i], hi_global)
            rb = int(min(rb, K + 1))
            if rb > lo:
                ubar[lo - 1:rb - 1, i] = log.u_star[i]
                catchup[lo - 1:rb - 1, i] = True

    h_u = np.column_stack([gains[i](log.u[:, i]) for i in range(n)])
    h_ubar = np.column_stack([gains[i](ubar[:, i]) for i in range(n)])
    deg = np.diag(lap.D)
    # g rows evaluated at the relabeled points, shared by both branches below
    g_bar = h_ubar @ lap.P.T - deg * h_ubar
    g_u = h_u @ lap.P.T - deg * h_u

    eps_noise = log.O_next - g_u
    corr = (h_u - h_ubar) @ lap.P.T
    ebar = np.where(catchup, -g_bar, eps_noise + corr)
    obar = np.where(catchup, 0.0, log.O_next)

    live_err = np.abs(g_bar + ebar - log.O_next)
    structure_max_err = float(np.max(np.where(catchup, 0.0, live_err))) if K else 0.0

    return AuxiliarySequences(ubar=ubar, ebar=ebar, obar=obar, sigma_bar=sbar,
                              times=times, u_star=log.u_star.copy(), c_M=log.c_M,
                              catchup_mask=catchup,
                              structure_max_err=structure_max_err)


@dataclass(frozen=True)
class RecursionCheck:
    max_abs_residual: float
    passed: bool
    sigma_consistent: bool
    threshold: float
    mismatch_steps: int


def verify_centralized_recursion(aux: AuxiliarySequences, sched: Schedule,
                                 threshold: float = 1e-9) -> RecursionCheck:
    """Replay the relabeled run as one centralized truncation recursion.

    From each row: candidate = ubar + (1/k) obar per agent; if the row's
    max |candidate| reaches ln(sigma_bar + c_M) every agent resets to its
    u_star and sigma_bar increments, else the candidates carry forward.
    Reports the largest deviation from the logged relabeling and whether the
    sigma_bar path matches the indicator exactly.
    """
    K, n = aux.ubar.shape
    if K < 2:
        return RecursionCheck(0.0, True, True, threshold, 0)
    a = 1.0 / np.arange(1, K + 1, dtype=float)
    cand = aux.ubar + a[:, None] * aux.obar
    bound = np.log(aux.sigma_bar + sched.c_M)
    ind = np.abs(cand).max(axis=1) >= bound
    pred = np.where(ind[:, None], aux.u_star[None, :], cand)
    diff = np.abs(pred[:-1] - aux.ubar[1:])
    resid = float(diff.max())
    mismatch = int(np.count_nonzero(diff.max(axis=1) > threshold))
    sigma_ok = bool(np.array_equal(aux.sigma_bar[1:],
                                   aux.sigma_bar[:-1] + ind[:-1].astype(aux.sigma_bar.dtype)))
    return RecursionCheck(max_abs_residual=resid,
                          passed=resid < threshold and sigma_ok,
                          sigma_consistent=sigma_ok,
                          threshold=threshold,
                          mismatch_steps=mismatch)


# ---------------------------------------------------------------------------
# consensus point, Lyapunov function, run metrics

def _bisect_increasing(f, tol: float = 1e-12, maxiter: int = 500):
    """Root of an increasing scalar function, expanding bracket from [-1, 1]."""
    lo, hi = -1.0, 1.0
    flo, fhi = f(lo), f(hi)
    doublings = 0
    while flo > 0.0:
        lo *= 2.0
        doublings += 1
        if doublings > 200:
            raise BracketFailure("no sign change after 200 doublings (low side)")
        flo = f(lo)
    while fhi < 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise BracketFailure("no sign change after 200 doublings (high side)")
        fhi = f(hi)
    for _ in range(maxiter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ConsensusPoint:
    b: float
    u: np.ndarray


def consensus_point(gains, c: float, tol: float = 1e-9) -> ConsensusPoint:
    """The unique point with all gains equal and components summing to c.

    Solves sum_i h_i^{-1}(b) = c for the common level b, then inverts each
    gain; requires every h strictly increasing onto the reals.
    """

    def inv(i, b):
        return _bisect_increasing(lambda x: gains[i](x) - b)

    n = len(gains)
    b = _bisect_increasing(lambda bb: sum(inv(i, bb) for i in range(n)) - c)
    u = np.array([inv(i, b) for i in range(n)])
    if abs(float(u.sum()) - c) > max(tol, 1e-9 * max(1.0, abs(c))):
        raise BracketFailure(
            f"consensus point sum {u.sum()} missed target {c} beyond tolerance")
    return ConsensusPoint(b=b, u=u)


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    def simp(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simp(x0, xm, f0, fl, f1)
        right = simp(xm, x2, f1, fr, f2)
        if depth > 50 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, xm, f0, fl, f1, left, 0.5 * tol, depth + 1)
                + recurse(xm, x2, f1, fr, f2, right, 0.5 * tol, depth + 1))

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simp(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def gain_roots(gains) -> np.ndarray:
    """Component-wise zeros of the gain maps."""
    return np.array([_bisect_increasing(lambda x: g(x)) for g in gains])


def lyapunov_v(u: np.ndarray, gains, tol: float = 1e-10) -> float:
    """Sum of integrals of each gain from its zero up to u_i.

    Nonnegative by monotonicity; its gradient is the gain vector h(u).
    """
    u = np.asarray(u, dtype=float)
    roots = gain_roots(gains)
    total = 0.0
    for i, g in enumerate(gains):
        total += _adaptive_simpson(g, float(roots[i]), float(u[i]), tol)
    return total


@dataclass
class RunMetrics:
    k: np.ndarray
    spread_y: np.ndarray
    residual: np.ndarray
    sigma_bar: np.ndarray
    v: np.ndarray


def consensus_metrics(log: TrajectoryLog, gains, lap: LaplacianView) -> RunMetrics:
    """Per-step consensus diagnostics.

    spread_y is the max pairwise gap of the outputs produced in the round
    (NaN on strided-out steps); residual is the sup norm of L h(u_k); v is
    the Lyapunov value by one Simpson panel per component, exact for the
    polynomial gain catalog (degree <= 3).
    """
    K, n = log.u.shape
    h_u = np.column_stack([gains[i](log.u[:, i]) for i in range(n)])
    residual = np.abs(h_u @ lap.L.T).max(axis=1)
    spread = log.y_next.max(axis=1) - log.y_next.min(axis=1)
    roots = gain_roots(gains)
    v = np.zeros(K)
    for i, g in enumerate(gains):
        a = roots[i]
        b = log.u[:, i]
        mid = 0.5 * (a + b)
        v += (b - a) / 6.0 * (g(a) + 4.0 * g(mid) + g(b))
    return RunMetrics(k=np.arange(1, K + 1), spread_y=spread,
                      residual=residual, sigma_bar=log.sigma_bar.astype(float), v=v)


# ---------------------------------------------------------------------------
# bundled verification

def full_verification(log: TrajectoryLog, gains, topology: Topology,
                      m_grid_k: int = 1000,
                      m_grid_T: tuple = (0.1, 0.5, 1.0, 2.0)):
    """Run every identity check on one log.

    Returns (report, extras): report carries the four headline fields
    {lemma3_residual, eq26_ok, eq28_ok, decomposition_max_err}; extras carry
    supporting diagnostics for human output.
    """
    lap = laplacian(topology)
    aux = build_auxiliary(log, gains, topology)
    sched = Schedule(c_M=log.c_M)
    rec = verify_centralized_recursion(aux, sched)

    d = diameter(topology)
    eq26 = check_window_bound(aux.times, d, log.horizon)

    eq28 = True
    for T in m_grid_T:
        for k in range(1, m_grid_k + 1):
            try:
                m_of(k, T)
            except AssertionError:
                eq28 = False

    K, n = log.u.shape
    deg = np.diag(lap.D)
    h_u = np.column_stack([gains[i](log.u[:, i]) for i in range(n)])
    e1 = np.zeros((K, n))
    e3 = np.zeros((K, n))
    for col, (a, b) in enumerate(log.pairs):
        w = lap.P[a - 1, b - 1]
        e1[:, a - 1] += w * log.eps[:, col]
        e3[:, a - 1] += w * (log.y_next[:, b - 1] - h_u[:, b - 1])
    e2 = deg * (h_u - log.y_next)
    g_u = h_u @ lap.P.T - deg * h_u
    decomp_err = float(np.max(np.abs(e1 + e2 + e3 - (log.O_next - g_u))))

    report = {
        "lemma3_residual": rec.max_abs_residual,
        "eq26_ok": eq26,
        "eq28_ok": eq28,
        "decomposition_max_err": decomp_err,
    }
    extras = {
        "recursion": rec,
        "structure_max_err": aux.structure_max_err,
        "sigma_consistent": rec.sigma_consistent,
        "diameter": d,
        "truncation_top": aux.times.top,
    }
    return report, extras
