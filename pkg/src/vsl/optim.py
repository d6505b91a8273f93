"""Small derivative-free optimizers used by the capacity model.

Both routines are deterministic: identical inputs walk identical iterates,
which keeps fits byte-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_section_min(f: Callable[[float], float], lo: float, hi: float,
                       xtol: float = 1e-6) -> tuple[float, float]:
    """Minimize a unimodal scalar function on [lo, hi].

    Returns (x, f(x)) with x within xtol of the minimizer.
    """
    if hi < lo:
        lo, hi = hi, lo
    h = hi - lo
    if h <= xtol:
        x = 0.5 * (lo + hi)
        return x, f(x)
    n = int(math.ceil(math.log(xtol / h) / math.log(_INVPHI)))
    c = lo + _INVPHI2 * h
    d = lo + _INVPHI * h
    fc = f(c)
    fd = f(d)
    for _ in range(n):
        if fc < fd:
            hi, d, fd = d, c, fc
            h *= _INVPHI
            c = lo + _INVPHI2 * h
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            h *= _INVPHI
            d = lo + _INVPHI * h
            fd = f(d)
    if fc < fd:
        x = 0.5 * (lo + d)
    else:
        x = 0.5 * (c + hi)
    return x, f(x)


@dataclass
class SimplexResult:
    x: list[float]
    fx: float
    evaluations: int
    converged: bool  # simplex diameter fell below tolerance


def nelder_mead(f: Callable[[Sequence[float]], float], x0: Sequence[float],
                steps: Sequence[float], diameter_tol: float = 1e-6,
                max_evals: int = 2000) -> SimplexResult:
    """Nelder-Mead simplex descent with a simplex-diameter stopping rule.

    steps give the per-coordinate offsets used to build the initial simplex.
    Stops when the largest vertex-to-vertex distance drops below
    diameter_tol, or after max_evals objective evaluations (converged=False).
    """
    dim = len(x0)
    if dim != len(steps):
        raise ValueError("x0 and steps must have the same length")

    evals = 0

    def call(x: list[float]) -> float:
        nonlocal evals
        evals += 1
        return f(x)

    verts = [list(x0)]
    for i in range(dim):
        v = list(x0)
        v[i] += steps[i] if steps[i] != 0.0 else 1e-3
        verts.append(v)
    vals = [call(v) for v in verts]

    def diameter() -> float:
        worst = 0.0
        for i in range(dim + 1):
            for j in range(i + 1, dim + 1):
                d = math.dist(verts[i], verts[j])
                if d > worst:
                    worst = d
        return worst

    converged = False
    while evals < max_evals:
        order = sorted(range(dim + 1), key=lambda k: vals[k])
        verts = [verts[k] for k in order]
        vals = [vals[k] for k in order]
        if diameter() < diameter_tol:
            converged = True
            break

        centroid = [sum(v[i] for v in verts[:-1]) / dim for i in range(dim)]
        worst = verts[-1]
        reflect = [centroid[i] + (centroid[i] - worst[i]) for i in range(dim)]
        f_r = call(reflect)

        if vals[0] <= f_r < vals[-2]:
            verts[-1], vals[-1] = reflect, f_r
            continue
        if f_r < vals[0]:
            expand = [centroid[i] + 2.0 * (centroid[i] - worst[i]) for i in range(dim)]
            f_e = call(expand)
            if f_e < f_r:
                verts[-1], vals[-1] = expand, f_e
            else:
                verts[-1], vals[-1] = reflect, f_r
            continue
        contract = [centroid[i] + 0.5 * (worst[i] - centroid[i]) for i in range(dim)]
        f_c = call(contract)
        if f_c < vals[-1]:
            verts[-1], vals[-1] = contract, f_c
            continue
        # Shrink toward the best vertex.
        best = verts[0]
        for k in range(1, dim + 1):
            verts[k] = [best[i] + 0.5 * (verts[k][i] - best[i]) for i in range(dim)]
            vals[k] = call(verts[k])

    best_idx = min(range(dim + 1), key=lambda k: vals[k])
    return SimplexResult(list(verts[best_idx]), vals[best_idx], evals, converged)
