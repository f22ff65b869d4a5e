"""Information rate function of a finite source.

``solve_irf`` minimises I[X; Xh] over channels subject to any mix of
expected-distortion and marginal-divergence constraints, working on the
Lagrange dual.

Divergence constraints enter the Lagrangian through their conjugate form.
TV and scalar W1 are suprema of linear functionals of the marginal, so a
divergence multiplier is a *price vector* on reconstruction symbols with a
norm penalty (oscillation for TV, Lipschitz constant for W1).  KL keeps an
explicit scalar multiplier alongside its price vector (perspective of the
conjugate).  For fixed multipliers the inner problem is a plain
rate-distortion problem with a cost matrix, solved by Blahut-Arimoto.

The dual is concave but not smooth (the inner minimiser jumps), so the
multipliers are driven by a trust-region cutting-plane method whose master
problem is an LP.  Every inner solve yields Blahut's certified lower bound
on the rate; primal channels are recovered by mixing the inner channels and
polishing the mixture into the feasible set, and ``gap_estimate`` is the
distance between the best feasible rate and the best certified bound.

``brute_force_irf`` is the independent oracle: an exhaustive scan over a
grid of channels, restricted to tiny alphabets.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, linprog

from .probcore import (
    _divergence_arrays,
    Channel,
    DimensionMismatch,
    Distortion,
    DistortionMatrix,
    DivergenceKind,
    MarginalDivergence,
    Pmf,
    evaluate_constraints,
    mutual_information,
)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
FEAS_TOL = 1e-9  # constraint slack accepted for a polished channel
MAX_OUTER = 1000
MAX_INNER = 10_000


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class IrfProblem:
    source: Pmf
    constraints: tuple
    recon_size: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.source, Pmf):
            object.__setattr__(self, "source", Pmf(self.source))
        cs = tuple(self.constraints)
        if not cs:
            raise ValueError("an IRF problem needs at least one constraint")
        object.__setattr__(self, "constraints", cs)
        m = self.recon_size or self.source.alphabet_size
        object.__setattr__(self, "recon_size", int(m))
        n = self.source.alphabet_size
        for c in cs:
            if isinstance(c, Distortion):
                if c.matrix.shape != (n, m):
                    raise DimensionMismatch(f"distortion {c.matrix.shape}, expected {(n, m)}")
            elif isinstance(c, MarginalDivergence):
                if c.source_proj is None:
                    if m < n:
                        raise DimensionMismatch("reconstruction alphabet smaller than the source's")
                    a = m
                else:
                    if c.source_proj.shape[0] != n or c.recon_proj.shape[0] != m:
                        raise DimensionMismatch("projection shapes do not match the alphabets")
                    a = c.source_proj.shape[1]
                if c.kind.name == "w1" and len(c.kind.values) != a:
                    raise DimensionMismatch(f"w1 needs {a} values, got {len(c.kind.values)}")
            else:
                raise TypeError(f"not a constraint functional: {c!r}")

    @property
    def thresholds(self) -> list[float]:
        return [c.threshold for c in self.constraints]


@dataclass
class IrfSolution:
    rate_bits: float
    channel: Optional[Channel]
    achieved: list
    status: Status
    gap_estimate: float
    lower_bound: float = 0.0
    iterations: int = 0
    thresholds: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status is not Status.INFEASIBLE


# ---------------------------------------------------------------------------
# brute-force oracle


def _simplex_grid(m: int, k: int) -> np.ndarray:
    """All points of the m-simplex with coordinates in multiples of 1/k."""
    pts = [c for c in itertools.product(range(k + 1), repeat=m - 1) if sum(c) <= k]
    arr = np.array([list(c) + [k - sum(c)] for c in pts], dtype=float)
    return arr / k


def _batch_divergence(kind: DivergenceKind, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # p: (a,), q: (B, a)
    if kind.name == "tv":
        return 0.5 * np.abs(q - p).sum(axis=1)
    if kind.name == "kl":
        supp = p > 0
        qs = q[:, supp]
        with np.errstate(divide="ignore"):
            terms = p[supp] * (np.log2(p[supp]) - np.log2(qs))
        out = terms.sum(axis=1)
        out[np.any(qs <= 0, axis=1)] = np.inf
        return np.maximum(out, 0.0)
    order = np.argsort(kind.values)
    gaps = np.diff(np.asarray(kind.values)[order])
    cdf = np.cumsum(q[:, order] - p[order], axis=1)[:, :-1]
    return np.abs(cdf) @ gaps


def _grid_search(problem: IrfProblem, grid_step: float, chunk: int = 200_000) -> IrfSolution:
    p = problem.source.probs
    n, m = p.size, problem.recon_size
    k = int(round(1.0 / grid_step))
    rows = _simplex_grid(m, k)
    g = rows.shape[0]
    total = g ** n
    thetas = np.array(problem.thresholds, dtype=float)
    best_rate, best_idx = math.inf, None
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, (g,) * n)
        Q = np.stack([rows[i] for i in idx], axis=1)  # (B, n, m)
        J = p[None, :, None] * Q
        marg = J.sum(axis=1)
        vals = []
        for c in problem.constraints:
            if isinstance(c, Distortion):
                vals.append((J * c.matrix.d).sum(axis=(1, 2)))
            else:
                if c.source_proj is None:
                    a, b = problem.source.padded(m), marg
                else:
                    a, b = p @ c.source_proj, marg @ c.recon_proj
                vals.append(_batch_divergence(c.kind, a, b))
        ok = np.all(np.stack(vals, axis=1) <= thetas + FEAS_TOL, axis=1)
        if not np.any(ok):
            continue
        denom = p[None, :, None] * marg[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(J > 0, J * np.log2(J / np.where(denom > 0, denom, 1.0)), 0.0)
        mi = terms.sum(axis=(1, 2))
        mi[~ok] = np.inf
        j = int(np.argmin(mi))
        if mi[j] < best_rate:
            best_rate, best_idx = float(mi[j]), flat[j]
    if best_idx is None:
        return IrfSolution(math.inf, None, [], Status.INFEASIBLE, math.inf,
                           thresholds=problem.thresholds)
    idx = np.unravel_index(best_idx, (g,) * n)
    ch = Channel(np.stack([rows[i] for i in idx]))
    return IrfSolution(max(best_rate, 0.0), ch, evaluate_constraints(problem.source, ch, problem.constraints),
                       Status.OPTIMAL, 0.0, lower_bound=max(best_rate, 0.0), thresholds=problem.thresholds)


def brute_force_irf(problem: IrfProblem, grid_step: float) -> IrfSolution:
    """Minimal mutual information over a grid of channels (alphabets <= 3).

    Each channel row ranges over the simplex points whose coordinates are
    multiples of ``grid_step``; the returned rate is the least mutual
    information among grid channels meeting every constraint, so it can only
    over-estimate the true infimum.
    """
    if not 0 < grid_step <= 0.5:
        raise ValueError("grid_step must lie in (0, 0.5]")
    if problem.source.alphabet_size > 3 or problem.recon_size > 3:
        raise TooLarge("brute force is limited to alphabets of size <= 3")
    return _grid_search(problem, grid_step)


def product_problem(problem: IrfProblem, n: int = 2) -> IrfProblem:
    """The ``n``-fold i.i.d. product problem with per-coordinate constraints.

    Product symbols are mixed-radix tuples (first coordinate most
    significant).  Each base constraint is imposed separately on every
    coordinate's joint law, never on the average over coordinates.
    """
    a, b = problem.source.alphabet_size, problem.recon_size
    src_tuples = list(itertools.product(range(a), repeat=n))
    rec_tuples = list(itertools.product(range(b), repeat=n))
    p = np.array([math.prod(problem.source.probs[s] for s in t) for t in src_tuples])
    cs = []
    for c in problem.constraints:
        for coord in range(n):
            if isinstance(c, Distortion):
                d = np.array([[c.matrix.d[s[coord], r[coord]] for r in rec_tuples] for s in src_tuples])
                cs.append(Distortion(DistortionMatrix(d), c.threshold))
            else:
                if c.source_proj is not None:
                    raise ValueError("nested projections are not supported")
                size = b
                sp = np.zeros((len(src_tuples), size))
                rp = np.zeros((len(rec_tuples), size))
                for i, t in enumerate(src_tuples):
                    sp[i, t[coord]] = 1.0
                for i, t in enumerate(rec_tuples):
                    rp[i, t[coord]] = 1.0
                cs.append(MarginalDivergence(c.kind, c.threshold, sp, rp))
    # rounding in the product can leave the sum a hair off 1
    return IrfProblem(Pmf(p / p.sum()), tuple(cs), len(rec_tuples))


def brute_force_product_irf(problem: IrfProblem, n: int = 2, grid_step: float = 0.25) -> IrfSolution:
    """Grid oracle for the two-fold product of a binary problem."""
    if problem.source.alphabet_size ** n > 4 or problem.recon_size ** n > 4:
        raise TooLarge("product brute force is limited to 4-symbol products")
    if grid_step < 0.2:
        raise TooLarge("product brute force needs grid_step >= 0.2")
    return _grid_search(product_problem(problem, n), grid_step)


# ---------------------------------------------------------------------------
# dual machinery


def _kl_conj(p: np.ndarray, g: np.ndarray):
    """sup over simplex u of <g, u> - KL(p || u) (bits).

    Returns (value, maximiser, KL(p || maximiser)).
    """
    a = 1.0 / LN2
    supp = p > 0
    # conj(g + c) = conj(g) + c; shifting keeps large prices stable
    shift = float(g.max())
    g = g - shift
    gs, ps = g[supp], p[supp]
    jmax = int(np.argmax(gs))
    gmax = gs[jmax]

    def f(nu):
        return float((a * ps / (nu - gs)).sum()) - 1.0

    lo = gmax + a * ps[jmax]
    hi = gmax + a
    nu = lo if f(lo) <= 0 else brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    u = np.zeros_like(p)
    if np.any(~supp):
        zidx = np.flatnonzero(~supp)
        jz = zidx[int(np.argmax(g[zidx]))]
        if g[jz] > nu:
            nu = g[jz]
            u[supp] = a * ps / (nu - gs)
            u[jz] = max(0.0, 1.0 - u[supp].sum())
        else:
            u[supp] = a * ps / (nu - gs)
    else:
        u[supp] = a * ps / (nu - gs)
    u /= u.sum()
    kl = float((ps * np.log2(ps / u[supp])).sum())
    return float(g @ u) - kl + shift, u, kl


class _Linear:
    def __init__(self, c: Distortion):
        self.d = c.matrix.d
        self.theta = c.threshold

    def value(self, J):
        return float((J * self.d).sum())


class _Divergence:
    """A marginal-divergence constraint seen through its price vector ``h``.

    TV and W1 are suprema of ``<h, m - p>`` over a norm ball (oscillation,
    resp. Lipschitz constant), so they contribute ``<h, p> + theta |h|`` to
    the dual.  KL carries a scalar multiplier ``lam`` next to ``h`` and
    contributes ``psi(h, lam) = lam (conj(h / lam) + theta)``.
    """

    def __init__(self, c: MarginalDivergence, source: Pmf, m_size: int):
        self.kind = c.kind
        self.theta = c.threshold
        if c.source_proj is None:
            self.A = np.eye(m_size)
            self.pk = source.padded(m_size)
        else:
            self.A = np.asarray(c.recon_proj)
            self.pk = source.probs @ c.source_proj
        self.size = self.pk.size
        if self.kind.name == "w1":
            order = np.argsort(self.kind.values)
            self.order = order
            self.gaps = np.diff(np.asarray(self.kind.values)[order])
            self.D = np.zeros((self.size - 1, self.size))
            for j in range(self.size - 1):
                self.D[j, order[j + 1]] = 1.0 / self.gaps[j]
                self.D[j, order[j]] = -1.0 / self.gaps[j]

    def value(self, marg):
        return _divergence_arrays(self.kind, self.pk, marg @ self.A)

    def penalty(self, h, lam=None):
        if self.kind.name == "kl":
            conj, _, _ = _kl_conj(self.pk, h / lam)
            return lam * (conj + self.theta)
        if self.kind.name == "tv":
            norm = float(h.max() - h.min())
        else:
            norm = float(np.abs(self.D @ h).max()) if self.D.size else 0.0
        return float(h @ self.pk) + self.theta * norm

    def kl_gradient(self, h, lam):
        # gradient of psi in (h, lam)
        _, u, kl = _kl_conj(self.pk, h / lam)
        return np.concatenate([u, [self.theta - kl]])


KL_LAM_FLOOR = 1e-9


class _DualLayout:
    """Flat dual vector: one multiplier per distortion, then per divergence
    its price vector (and, for KL, its scalar multiplier)."""

    def __init__(self, lins, divs):
        self.lins = lins
        self.divs = divs
        self.h_slices = []
        self.lam_index = []
        pos = len(lins)
        for dv in divs:
            self.h_slices.append(slice(pos, pos + dv.size))
            pos += dv.size
            if dv.kind.name == "kl":
                self.lam_index.append(pos)
                pos += 1
            else:
                self.lam_index.append(None)
        self.size = pos

    def initial(self):
        y = np.zeros(self.size)
        for li in self.lam_index:
            if li is not None:
                y[li] = 1.0
        return y

    def lower_bounds(self):
        lb = np.full(self.size, -np.inf)
        lb[: len(self.lins)] = 0.0
        for li in self.lam_index:
            if li is not None:
                lb[li] = KL_LAM_FLOOR
        return lb

    def cost(self, y, n, m):
        C = np.zeros((n, m))
        for i, ln in enumerate(self.lins):
            C = C + y[i] * ln.d
        for dv, sl in zip(self.divs, self.h_slices):
            C = C + (dv.A @ y[sl])[None, :]
        return C

    def penalty(self, y):
        total = sum(y[i] * ln.theta for i, ln in enumerate(self.lins))
        for dv, sl, li in zip(self.divs, self.h_slices, self.lam_index):
            total += dv.penalty(y[sl], None if li is None else y[li])
        return float(total)

    def cut(self, J, marg):
        """Coefficients of <J, C(y)> as a linear function of y."""
        a = np.zeros(self.size)
        for i, ln in enumerate(self.lins):
            a[i] = ln.value(J)
        for dv, sl in zip(self.divs, self.h_slices):
            a[sl] = marg @ dv.A
        return a


class _Master:
    """Trust-region cutting-plane model of the concave dual function.

    The smooth part (inner minimum and KL perspectives) is described by cuts;
    the TV oscillation and W1 Lipschitz penalties are written exactly as
    linear constraints.  Solved with HiGHS.
    """

    MAX_CUTS = 150

    def __init__(self, layout: _DualLayout):
        self.L = layout
        self.phi_cuts = []  # (coeffs a, const b): phi(y) <= b + a.y
        self.kl_cuts = [[] for _ in layout.divs]  # -psi(y) <= b + a.y
        ny = layout.size
        self.n_kl = sum(li is not None for li in layout.lam_index)
        # variables: y, v, w (one per KL block), then per TV block (hi, lo),
        # per W1 block L
        self.v = ny
        self.w = {}
        pos = ny + 1
        for k, li in enumerate(layout.lam_index):
            if li is not None:
                self.w[k] = pos
                pos += 1
        self.aux = {}
        for k, dv in enumerate(layout.divs):
            if dv.kind.name == "tv":
                self.aux[k] = (pos, pos + 1)
                pos += 2
            elif dv.kind.name == "w1":
                self.aux[k] = (pos,)
                pos += 1
        self.nvar = pos
        self._static()

    def _static(self):
        L = self.L
        c = np.zeros(self.nvar)  # minimise -objective
        c[self.v] = -1.0
        for k in self.w.values():
            c[k] = -1.0
        for i, ln in enumerate(L.lins):
            c[i] += ln.theta
        rows, rhs, eq_rows = [], [], []
        for k, (dv, sl) in enumerate(zip(L.divs, L.h_slices)):
            idx = np.arange(sl.start, sl.stop)
            row = np.zeros(self.nvar)
            row[idx] = 1.0
            eq_rows.append(row)  # prices are defined up to a constant
            if dv.kind.name == "kl":
                continue
            c[idx] += dv.pk
            if dv.kind.name == "tv":
                hi, lo = self.aux[k]
                c[hi] += dv.theta
                c[lo] -= dv.theta
                for j in idx:
                    r1 = np.zeros(self.nvar)
                    r1[j], r1[hi] = 1.0, -1.0
                    r2 = np.zeros(self.nvar)
                    r2[j], r2[lo] = -1.0, 1.0
                    rows += [r1, r2]
                    rhs += [0.0, 0.0]
            else:
                (lv,) = self.aux[k]
                c[lv] += dv.theta
                for drow in dv.D:
                    for sgn in (1.0, -1.0):
                        r = np.zeros(self.nvar)
                        r[idx] = sgn * drow
                        r[lv] = -1.0
                        rows.append(r)
                        rhs.append(0.0)
        self.c = c
        self.static_rows = rows
        self.static_rhs = rhs
        self.eq_rows = eq_rows

    def add(self, y, phi_a, phi_b, kl_parts):
        self.phi_cuts.append((phi_a, phi_b))
        for k, part in kl_parts.items():
            self.kl_cuts[k].append(part)

    def prune(self, keep):
        if len(self.phi_cuts) > self.MAX_CUTS:
            self.phi_cuts = [self.phi_cuts[i] for i in keep]

    def solve(self, center, radius):
        L = self.L
        rows, rhs = list(self.static_rows), list(self.static_rhs)
        first_phi = len(rows)
        for a, b in self.phi_cuts:
            r = np.zeros(self.nvar)
            r[: L.size] = -a
            r[self.v] = 1.0
            rows.append(r)
            rhs.append(b)
        for k, cuts in enumerate(self.kl_cuts):
            for a, b in cuts:
                r = np.zeros(self.nvar)
                r[: L.size] = -a
                r[self.w[k]] = 1.0
                rows.append(r)
                rhs.append(b)
        lb = np.maximum(center - radius, L.lower_bounds())
        ub = center + radius
        bounds = [(lo, hi) for lo, hi in zip(lb, ub)] + [(None, None)] * (self.nvar - L.size)
        for k, aux in self.aux.items():
            if len(aux) == 1:
                bounds[aux[0]] = (0.0, None)
        eq = np.array(self.eq_rows) if self.eq_rows else None
        res = linprog(self.c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=eq,
                      b_eq=np.zeros(len(self.eq_rows)) if self.eq_rows else None,
                      bounds=bounds, method="highs")
        if res.status != 0:
            return None, math.inf, None
        weights = -res.ineqlin.marginals[first_phi:first_phi + len(self.phi_cuts)]
        y = np.clip(res.x[: L.size], lb, ub)
        return y, -float(res.fun), np.maximum(weights, 0.0)


def _blahut_arimoto(p, C, r, tol, max_iter):
    """Minimise I + <J, C> over channels for a fixed cost matrix (bits).

    Returns (channel rows, r, upper value, certified lower bound, iterations).
    """
    shift = C.min(axis=1)
    E = np.exp2(-(C - shift[:, None]))
    live = p > 0
    pl, El = p[live], E[live]
    it = 0
    while True:
        z = El @ r
        c = (pl / z) @ El
        gap = math.log2(max(float(c.max()), 1.0))
        if gap <= tol or it >= max_iter:
            break
        r = r * c
        r /= r.sum()
        it += 1
    z = E @ r
    Q = r[None, :] * E / z[:, None]
    upper = float(pl @ (shift[live] - np.log2(z[live])))
    return Q, r, upper, upper - gap, it


def _restricted_primal(p, lins, divs, channels, rates):
    """Cheapest convex combination of stored channels meeting the constraints.

    Linear, TV and W1 constraints are exact; KL is relaxed to its tangent
    planes at the stored marginals, so the polisher may still have a little
    to do.  Returns the mixed channel or None when no mixture is feasible.
    """
    K = len(channels)
    Js = [p[:, None] * Q for Q in channels]
    margs = np.array([J.sum(axis=0) for J in Js])
    extra = [dv.size if dv.kind.name == "tv" else dv.size - 1 if dv.kind.name == "w1" else 0
             for dv in divs]
    nvar = K + sum(extra)
    rows, rhs = [], []
    for ln in lins:
        row = np.zeros(nvar)
        row[:K] = [ln.value(J) for J in Js]
        rows.append(row)
        rhs.append(ln.theta)
    off = K
    for dv, cnt in zip(divs, extra):
        mk = margs @ dv.A  # (K, a)
        if dv.kind.name == "kl":
            supp = dv.pk > 0
            for u0 in mk:
                if np.any(u0[supp] < 1e-12):
                    continue
                grad = np.zeros_like(u0)
                grad[supp] = -dv.pk[supp] / (u0[supp] * LN2)
                kl0 = float((dv.pk[supp] * np.log2(dv.pk[supp] / u0[supp])).sum())
                row = np.zeros(nvar)
                row[:K] = mk @ grad
                rows.append(row)
                rhs.append(dv.theta - kl0 + grad @ u0)
            continue
        if dv.kind.name == "tv":
            lin, ref, wts = mk.T, dv.pk, np.full(cnt, 0.5)
        else:
            lin = np.cumsum(mk[:, dv.order], axis=1)[:, :-1].T
            ref = np.cumsum(dv.pk[dv.order])[:-1]
            wts = dv.gaps
        for j in range(cnt):
            for sgn in (1.0, -1.0):
                row = np.zeros(nvar)
                row[:K] = sgn * lin[j]
                row[off + j] = -1.0
                rows.append(row)
                rhs.append(sgn * ref[j])
        row = np.zeros(nvar)
        row[off:off + cnt] = wts
        rows.append(row)
        rhs.append(dv.theta)
        off += cnt
    cost = np.zeros(nvar)
    cost[:K] = rates
    A_eq = np.zeros((1, nvar))
    A_eq[0, :K] = 1.0
    res = linprog(cost, A_ub=np.array(rows) if rows else None, b_ub=np.array(rhs) if rhs else None,
                  A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * nvar, method="highs")
    if res.status != 0:
        return None
    alpha = np.maximum(res.x[:K], 0.0)
    return np.tensordot(alpha / alpha.sum(), np.array(channels), axes=1)


# ---------------------------------------------------------------------------
# feasibility and polishing


class _Feasibility:
    """LP (with KL cutting planes) minimising the worst linear violation
    subject to every divergence constraint."""

    def __init__(self, problem: IrfProblem, lins, divs):
        self.problem = problem
        self.lins = lins
        self.divs = divs

    def solve(self):
        p = self.problem.source.probs
        n, m = p.size, self.problem.recon_size
        nJ = n * m
        cols = nJ + 1  # J entries then t
        extra = []  # (name, count)
        for dv in self.divs:
            if dv.kind.name in ("tv", "w1"):
                extra.append(dv.pk.size - (1 if dv.kind.name == "w1" else 0))
            else:
                extra.append(0)
        total = cols + sum(extra)
        A_eq = np.zeros((n, total))
        for x in range(n):
            A_eq[x, x * m:(x + 1) * m] = 1.0
        b_eq = p.copy()
        A_ub, b_ub = [], []
        for ln in self.lins:
            row = np.zeros(total)
            row[:nJ] = ln.d.ravel()
            row[nJ] = -1.0
            A_ub.append(row)
            b_ub.append(ln.theta)
        # marginal of projected recon: mk = sum_x J[x,:] @ A
        offset = cols
        kl_divs = []
        for dv, cnt in zip(self.divs, extra):
            Mk = np.zeros((dv.pk.size, total))  # mk as linear map of J
            for x in range(n):
                Mk[:, x * m:(x + 1) * m] = dv.A.T
            if dv.kind.name == "tv":
                for j in range(dv.pk.size):
                    for sgn in (1.0, -1.0):
                        row = sgn * Mk[j].copy()
                        row[offset + j] = -1.0
                        A_ub.append(row)
                        b_ub.append(sgn * dv.pk[j])
                row = np.zeros(total)
                row[offset:offset + cnt] = 0.5
                A_ub.append(row)
                b_ub.append(dv.theta)
            elif dv.kind.name == "w1":
                cum = np.cumsum(Mk[dv.order], axis=0)[:-1]
                cump = np.cumsum(dv.pk[dv.order])[:-1]
                for j in range(cnt):
                    for sgn in (1.0, -1.0):
                        row = sgn * cum[j].copy()
                        row[offset + j] = -1.0
                        A_ub.append(row)
                        b_ub.append(sgn * cump[j])
                row = np.zeros(total)
                row[offset:offset + cnt] = dv.gaps
                A_ub.append(row)
                b_ub.append(dv.theta)
            else:
                kl_divs.append((dv, Mk))
            offset += cnt
        bounds = [(0, None)] * nJ + [(-1.0 if not self.lins else None, None)] + [(0, None)] * sum(extra)
        cost = np.zeros(total)
        cost[nJ] = 1.0
        cuts = {id(dv): [dv.pk.copy()] for dv, _ in kl_divs}
        for _ in range(200):
            rows_ub, rhs_ub = list(A_ub), list(b_ub)
            for dv, Mk in kl_divs:
                target = max(dv.theta - 1e-10, 0.5 * dv.theta)
                for u0 in cuts[id(dv)]:
                    supp = dv.pk > 0
                    grad = np.zeros_like(u0)
                    grad[supp] = -dv.pk[supp] / (u0[supp] * LN2)
                    kl0 = float((dv.pk[supp] * np.log2(dv.pk[supp] / u0[supp])).sum())
                    rows_ub.append(grad @ Mk)
                    rhs_ub.append(target - kl0 + grad @ u0)
            res = linprog(cost, A_ub=np.array(rows_ub) if rows_ub else None,
                          b_ub=np.array(rhs_ub) if rhs_ub else None, A_eq=A_eq, b_eq=b_eq,
                          bounds=bounds, method="highs")
            if res.status != 0:
                return None, math.inf
            J = np.maximum(res.x[:nJ].reshape(n, m), 0.0)
            marg = J.sum(axis=0)
            done = True
            for dv, Mk in kl_divs:
                u = marg @ dv.A
                kl = dv.value(marg)
                if kl > dv.theta:
                    done = False
                    # cut at a point with finite KL
                    u0 = u if np.all(u[dv.pk > 0] > 1e-12) else 0.5 * (u + dv.pk)
                    cuts[id(dv)].append(u0)
            if done:
                break
        else:
            return None, math.inf
        t = float(res.x[nJ]) if self.lins else -1.0
        return _rows_from_joint(p, J, m), t


def _rows_from_joint(p, J, m):
    Q = np.full((p.size, m), 1.0 / m)
    live = p > 0
    Q[live] = J[live] / J[live].sum(axis=1, keepdims=True)
    return Q


def _ipf(p, Q, target, iters=2000):
    """I-projection of p*Q onto joints with marginals (p, target)."""
    live = p > 0
    # a whisper of the target product keeps every column scalable
    J = p[:, None] * Q + 1e-13 * p[:, None] * target[None, :]
    for _ in range(iters):
        col = J.sum(axis=0)
        scale = np.divide(target, col, out=np.zeros_like(target), where=col > 0)
        J = J * scale[None, :]
        rs = J.sum(axis=1)
        J[live] *= (p[live] / rs[live])[:, None]
        if np.max(np.abs(J.sum(axis=0) - target)) <= 1e-15:
            break
    return _rows_from_joint(p, J, Q.shape[1])


class _Polisher:
    def __init__(self, problem: IrfProblem, lins, divs, q_feas):
        self.problem = problem
        self.p = problem.source.probs
        self.lins = lins
        self.divs = divs
        self.q_feas = q_feas
        self.anchor = problem.source.padded(problem.recon_size) if divs else None
        self.feas_lin = [self._lin_val(ln, q_feas) for ln in lins]

    def _lin_val(self, ln, Q):
        return float(((self.p[:, None] * Q) * ln.d).sum())

    def _div_ok(self, marg, slack=0.0):
        return all(dv.value(marg) <= dv.theta + slack for dv in self.divs)

    def _scale_into_ball(self, marg):
        # largest s with anchor + s (marg - anchor) inside every divergence ball
        s = 1.0
        for dv in self.divs:
            v = dv.value(marg)
            if v <= dv.theta:
                continue
            if dv.kind.name in ("tv", "w1"):
                s = min(s, dv.theta / v)  # both scale linearly in s
            else:
                f = lambda t: dv.value(self.anchor + t * (marg - self.anchor)) - dv.theta
                hi = 1.0 if math.isfinite(v) else 1.0 - 1e-12
                while not math.isfinite(f(hi)):
                    hi *= 0.5
                s = min(s, brentq(f, 0.0, hi, xtol=1e-15) if f(hi) > 0 else hi)
        s *= 1.0 - 1e-12
        # rounding can leave the point just outside a tiny ball; back off with
        # a doubling step, ending at the anchor (divergence 0) if need be
        step = 1e-9
        while s > 0 and not self._div_ok(self.anchor + s * (marg - self.anchor)):
            s = s * (1.0 - step) if step < 0.5 else 0.0
            step *= 2.0
        return self.anchor + s * (marg - self.anchor)

    def polish(self, Q):
        if self.divs:
            marg = self.p @ Q
            target = self._scale_into_ball(marg)
            if not np.array_equal(target, marg):
                Q = _ipf(self.p, Q, target)
                if not self._div_ok(self.p @ Q, FEAS_TOL):
                    Q = None
        if Q is None:
            return self.q_feas
        t = 0.0
        for ln, fv in zip(self.lins, self.feas_lin):
            v = self._lin_val(ln, Q)
            if v > ln.theta:
                if fv >= v:
                    return self.q_feas
                t = max(t, (v - ln.theta) / (v - fv))
        if t > 0:
            Q = (1.0 - t) * Q + t * self.q_feas
        return Q


def _clean_rows(Q):
    Q = np.maximum(Q, 0.0)
    return Q / Q.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# solver


def solve_irf(problem: IrfProblem, tol: float = 1e-4, max_outer: int = MAX_OUTER,
              max_inner: int = MAX_INNER) -> IrfSolution:
    """epsilon-optimal rate, channel and constraint values of ``problem``.

    The reported rate is the mutual information of a channel that meets every
    constraint; ``gap_estimate`` bounds its distance to the infimum.  Status
    is ``Optimal`` once the gap is within ``tol``; otherwise the best
    certified channel is returned with status ``MaxIterations``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    source = problem.source
    p = source.probs
    m = problem.recon_size
    thetas = problem.thresholds
    lins = [_Linear(c) for c in problem.constraints
            if isinstance(c, Distortion) and math.isfinite(c.threshold)]
    divs = [_Divergence(c, source, m) for c in problem.constraints
            if isinstance(c, MarginalDivergence) and math.isfinite(c.threshold)]
    for dv in divs:
        if not np.allclose(source.padded(m) @ dv.A, dv.pk, atol=1e-12, rtol=0):
            raise ValueError("divergence projections must map the source onto itself")

    q_feas, t_feas = _Feasibility(problem, lins, divs).solve()
    if q_feas is None or t_feas > FEAS_TOL:
        achieved = evaluate_constraints(source, Channel(_clean_rows(q_feas)), problem.constraints) if q_feas is not None else []
        log.info("infeasible: worst violation %.3g", t_feas)
        return IrfSolution(math.inf, None, achieved, Status.INFEASIBLE, math.inf,
                           lower_bound=math.inf, thresholds=thetas)
    q_feas = _clean_rows(q_feas)
    polisher = _Polisher(problem, lins, divs, q_feas)

    def certified(Q):
        ch = Channel(_clean_rows(Q))
        vals = evaluate_constraints(source, ch, problem.constraints)
        if all(v <= th + FEAS_TOL for v, th in zip(vals, thetas)):
            return ch, vals
        return None, vals

    best_ch, best_vals = certified(q_feas)
    if best_ch is None:
        raise RuntimeError("feasibility channel failed its own certificate")
    best_rate = mutual_information(source, best_ch)

    def consider(Q):
        nonlocal best_rate, best_ch, best_vals
        cand, vals = certified(polisher.polish(Q))
        if cand is not None:
            rate = mutual_information(source, cand)
            if rate < best_rate:
                best_rate, best_ch, best_vals = rate, cand, vals

    layout = _DualLayout(lins, divs)
    master = _Master(layout)
    inner_tol = min(tol / 10.0, 1e-3)
    r = np.full(m, 1.0 / m)
    channels, rates = [], []

    def evaluate(y):
        # certified dual value at y, plus the cuts it contributes
        nonlocal r
        Q, r, _, lb_inner, _ = _blahut_arimoto(p, layout.cost(y, p.size, m), r, inner_tol, max_inner)
        # floor tiny marginal entries so a changing cost can revive them
        r = np.maximum(r, 1e-15)
        r /= r.sum()
        J = p[:, None] * Q
        marg = J.sum(axis=0)
        kl_parts = {}
        for k, (dv, sl, li) in enumerate(zip(divs, layout.h_slices, layout.lam_index)):
            if li is None:
                continue
            grad = np.zeros(layout.size)
            kg = dv.kl_gradient(y[sl], y[li])
            grad[sl], grad[li] = kg[:-1], kg[-1]
            psi = dv.penalty(y[sl], y[li])
            kl_parts[k] = (-grad, -psi + float(grad @ y))
        rate_q = mutual_information(source, Channel(_clean_rows(Q)))
        a = layout.cut(J, marg)
        master.add(y, a, rate_q, kl_parts)
        channels.append(Q)
        rates.append(rate_q)
        consider(Q)
        pen = layout.penalty(y)
        # (certified lower value, value the cuts agree with)
        return lb_inner - pen, rate_q + float(a @ y) - pen

    center = layout.initial()
    best_lb, g_center = evaluate(center)
    radius = 1.0
    status = Status.MAX_ITERATIONS
    it = 0
    for it in range(1, max_outer + 1):
        if best_rate - max(best_lb, 0.0) <= tol:
            status = Status.OPTIMAL
            break
        y, model, weights = master.solve(center, radius)
        if y is None:
            log.warning("master LP failed; stopping")
            break
        predicted = model - g_center
        lb, g = evaluate(y)
        best_lb = max(best_lb, lb)
        if predicted > 0 and g - g_center >= 0.1 * predicted:
            if np.max(np.abs(y - center)) >= 0.99 * radius:
                radius *= 2.0
            center, g_center = y, g
        elif g < g_center:
            radius = max(0.5 * radius, 1e-9)
        # primal recovery, twice: the master's cut multipliers average the
        # inner channels, and a restricted LP mixes them under the constraints
        if weights.sum() > 0:
            consider(np.tensordot(weights / weights.sum(), np.array(channels[:weights.size]), axes=1))
        mix = _restricted_primal(p, lins, divs, channels, rates)
        if mix is not None:
            consider(mix)
        if len(channels) > _Master.MAX_CUTS:
            keep = [i for i in range(len(channels))
                    if (i < weights.size and weights[i] > 0) or i >= len(channels) - 50]
            master.prune(keep)
            channels = [channels[i] for i in keep]
            rates = [rates[i] for i in keep]
    lower = max(best_lb, 0.0)
    return IrfSolution(best_rate, best_ch, best_vals, status, max(best_rate - lower, 0.0),
                       lower_bound=lower, iterations=it, thresholds=thetas)


def rdpf(source: Pmf, d: DistortionMatrix, kind: DivergenceKind, theta_d: float, theta_D: float,
         tol: float = 1e-4, recon_size: Optional[int] = None) -> IrfSolution:
    """Rate-distortion-perception function at ``(theta_d, theta_D)``."""
    cs = (Distortion(d, theta_d), MarginalDivergence(kind, theta_D))
    return solve_irf(IrfProblem(source, cs, recon_size), tol)


@dataclass
class SweepRow:
    theta_d: float
    theta_D: float
    solution: Optional[IrfSolution]
    error: Optional[str] = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "Error"
        return self.solution.status.value


def sweep_surface(source: Pmf, d: DistortionMatrix, kind: DivergenceKind, theta_d_grid: Sequence[float],
                  theta_D_grid: Sequence[float], tol: float = 1e-4,
                  recon_size: Optional[int] = None) -> list[SweepRow]:
    """Row-major table of RDPF solutions over the threshold grid.

    Rates must not increase along either axis; violations larger than the
    combined gap estimates plus 1e-6 are reported as warnings and left
    untouched.
    """
    if len(theta_d_grid) == 0 or len(theta_D_grid) == 0:
        raise ValueError("threshold grids must be non-empty")
    rows = []
    for td in theta_d_grid:
        for tD in theta_D_grid:
            try:
                sol = rdpf(source, d, kind, td, tD, tol, recon_size)
                rows.append(SweepRow(td, tD, sol))
            except Exception as exc:  # recorded per row
                rows.append(SweepRow(td, tD, None, f"{type(exc).__name__}: {exc}"))
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            if a.solution is None or b.solution is None:
                continue
            if not (a.solution.feasible and b.solution.feasible):
                continue
            if b.theta_d >= a.theta_d and b.theta_D >= a.theta_D:
                lo, hi = b, a
            elif a.theta_d >= b.theta_d and a.theta_D >= b.theta_D:
                lo, hi = a, b
            else:
                continue
            slack = lo.solution.gap_estimate + hi.solution.gap_estimate + 1e-6
            if lo.solution.rate_bits > hi.solution.rate_bits + slack:
                warnings.warn(
                    f"rate not monotone: R({lo.theta_d}, {lo.theta_D})={lo.solution.rate_bits:.6g} > "
                    f"R({hi.theta_d}, {hi.theta_D})={hi.solution.rate_bits:.6g}",
                    RuntimeWarning, stacklevel=2)
    return rows
