"""Hand-assembled SVG report: PC vs set size, and d' vs set size in log-log.

No plotting dependency: the markup is built as text so that fixed inputs
always produce identical bytes, which keeps figures diffable in tests.
One polyline per difficulty level, with the fitted model's predictions
overlaid as dashed curves.
"""

from __future__ import annotations

import math
from typing import Sequence

from . import capacity
from .capacity import CapacityFit
from .errors import ValidationError
from .psychometrics import CellStats, DPrimePoint, normal_quantile

PANEL_W, PANEL_H = 420, 360
PAD_L, PAD_R, PAD_T, PAD_B = 58, 16, 34, 46
SVG_W, SVG_H = 2 * PANEL_W + 60, PANEL_H + 20

LEVEL_COLORS = {1: "#1b9e77", 2: "#d95f02", 3: "#7570b3"}
_FALLBACK_COLOR = "#666666"

MODEL_CURVE_SAMPLES = 25


def _num(v: float) -> str:
    return f"{v:.2f}"


def model_pc(fit: CapacityFit, difficulty: int, n: float) -> float:
    d1 = fit.params.d1_by_difficulty[difficulty]
    return capacity.predicted_pc(d1, fit.params.alpha, n)


def model_dprime(fit: CapacityFit, difficulty: int, n: float) -> float:
    return 2.0 * normal_quantile(model_pc(fit, difficulty, n))


def _check_keys(cells: Sequence[CellStats], fit: CapacityFit) -> list[int]:
    levels = sorted({c.difficulty for c in cells})
    missing = [lvl for lvl in levels if lvl not in fit.params.d1_by_difficulty]
    if missing:
        raise ValidationError(
            f"fit report has no d1 for difficulty levels {missing}")
    return levels


def report_rows(cells: Sequence[CellStats],
                dprimes: Sequence[DPrimePoint],
                fit: CapacityFit) -> list[dict]:
    """Observed and model-predicted values per cell, for report.csv."""
    _check_keys(cells, fit)
    rows = []
    for cell, dp in zip(cells, dprimes):
        pc_model = model_pc(fit, cell.difficulty, cell.set_size)
        rows.append({
            "task": cell.task,
            "difficulty": cell.difficulty,
            "set_size": cell.set_size,
            "pc": cell.pc,
            "dprime": dp.dprime,
            "pc_model": pc_model,
            "dprime_model": 2.0 * normal_quantile(pc_model),
        })
    return rows


class _Axes:
    """Maps data coordinates into one panel's pixel rectangle."""

    def __init__(self, x0: int, xlim: tuple[float, float],
                 ylim: tuple[float, float], logx: bool, logy: bool):
        self.x0 = x0
        self.xlim = xlim
        self.ylim = ylim
        self.logx = logx
        self.logy = logy

    def _t(self, v: float, lim: tuple[float, float], log: bool) -> float:
        lo, hi = lim
        if log:
            v, lo, hi = math.log(v), math.log(lo), math.log(hi)
        return (v - lo) / (hi - lo)

    def px(self, x: float) -> float:
        return self.x0 + PAD_L + self._t(x, self.xlim, self.logx) * (PANEL_W - PAD_L - PAD_R)

    def py(self, y: float) -> float:
        return PAD_T + (1.0 - self._t(y, self.ylim, self.logy)) * (PANEL_H - PAD_T - PAD_B)


def _panel(out: list[str], ax: _Axes, title: str, y_label: str,
           x_ticks: Sequence[int], y_ticks: Sequence[float]) -> None:
    left, right = ax.px(ax.xlim[0]), ax.px(ax.xlim[1])
    top, bottom = ax.py(ax.ylim[1]), ax.py(ax.ylim[0])
    out.append(f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(right - left)}" '
               f'height="{_num(bottom - top)}" fill="none" stroke="#000000" stroke-width="1"/>')
    out.append(f'<text x="{_num((left + right) / 2)}" y="{_num(top - 12)}" '
               f'text-anchor="middle" font-size="14">{title}</text>')
    for t in x_ticks:
        x = ax.px(t)
        out.append(f'<line x1="{_num(x)}" y1="{_num(bottom)}" x2="{_num(x)}" '
                   f'y2="{_num(bottom + 5)}" stroke="#000000" stroke-width="1"/>')
        out.append(f'<text x="{_num(x)}" y="{_num(bottom + 19)}" '
                   f'text-anchor="middle" font-size="11">{t}</text>')
    for t in y_ticks:
        y = ax.py(t)
        out.append(f'<line x1="{_num(left - 5)}" y1="{_num(y)}" x2="{_num(left)}" '
                   f'y2="{_num(y)}" stroke="#000000" stroke-width="1"/>')
        out.append(f'<text x="{_num(left - 8)}" y="{_num(y + 4)}" '
                   f'text-anchor="end" font-size="11">{t:g}</text>')
    out.append(f'<text x="{_num((left + right) / 2)}" y="{_num(bottom + 36)}" '
               f'text-anchor="middle" font-size="12">set size</text>')
    out.append(f'<text x="{_num(left - 40)}" y="{_num((top + bottom) / 2)}" '
               f'text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 {_num(left - 40)} {_num((top + bottom) / 2)})">'
               f'{y_label}</text>')


def _polyline(out: list[str], pts: Sequence[tuple[float, float]], color: str,
              dashed: bool) -> None:
    coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
    dash = ' stroke-dasharray="5,4"' if dashed else ""
    out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
               f'stroke-width="1.5"{dash}/>')


def _color(level: int) -> str:
    return LEVEL_COLORS.get(level, _FALLBACK_COLOR)


def build_report_svg(cells: Sequence[CellStats],
                     dprimes: Sequence[DPrimePoint],
                     fit: CapacityFit) -> str:
    """Two-panel report figure as a complete SVG document (a str).

    Raises:
        ValidationError: a cell's difficulty has no d1 entry in the fit.
    """
    if len(cells) != len(dprimes):
        raise ValidationError("cells and dprime rows must align one-to-one")
    levels = _check_keys(cells, fit)
    set_sizes = sorted({c.set_size for c in cells})
    n_lo, n_hi = min(set_sizes), max(set_sizes)
    curve_ns = [n_lo * (n_hi / n_lo) ** (i / (MODEL_CURVE_SAMPLES - 1))
                for i in range(MODEL_CURVE_SAMPLES)] if n_hi > n_lo else [n_lo]

    by_level = {lvl: sorted(((c, d) for c, d in zip(cells, dprimes)
                             if c.difficulty == lvl),
                            key=lambda pair: pair[0].set_size)
                for lvl in levels}
    pc_curves = {lvl: [(n, model_pc(fit, lvl, n)) for n in curve_ns]
                 for lvl in levels}

    # d' panel shows only positive values (log scale)
    d_values = [d.dprime for d in dprimes if d.dprime > 0]
    d_values += [2.0 * normal_quantile(pc) for curve in pc_curves.values()
                 for _, pc in curve if pc > 0.5]
    if not d_values:
        d_values = [1.0]
    d_lo = min(d_values) / 1.3
    d_hi = max(d_values) * 1.3

    pc_values = [c.pc for c in cells] + [pc for curve in pc_curves.values()
                                         for _, pc in curve]
    pc_lo = min(0.5, min(pc_values)) - 0.05
    pc_hi = 1.02

    ax_pc = _Axes(0, (n_lo - 0.4, n_hi + 0.4), (pc_lo, pc_hi),
                  logx=False, logy=False)
    ax_dp = _Axes(PANEL_W + 60, (n_lo / 1.15, n_hi * 1.15), (d_lo, d_hi),
                  logx=True, logy=True)

    out: list[str] = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" '
               f'height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">')
    out.append(f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="#ffffff"/>')

    pc_ticks = [round(0.5 + 0.1 * i, 1) for i in range(6) if 0.5 + 0.1 * i <= pc_hi]
    _panel(out, ax_pc, "Proportion correct", "proportion correct",
           set_sizes, pc_ticks)
    d_ticks = [t for t in (0.125, 0.25, 0.5, 1, 2, 4, 8, 16) if d_lo <= t <= d_hi]
    _panel(out, ax_dp, f"d&#8242; (log-log), model &#945;={fit.params.alpha:.2f}",
           "d&#8242;", set_sizes, d_ticks)

    for lvl in levels:
        color = _color(lvl)
        pairs = by_level[lvl]
        _polyline(out, [(ax_pc.px(n), ax_pc.py(pc)) for n, pc in pc_curves[lvl]],
                  color, dashed=True)
        _polyline(out, [(ax_pc.px(c.set_size), ax_pc.py(c.pc)) for c, _ in pairs],
                  color, dashed=False)
        for c, _ in pairs:
            out.append(f'<circle cx="{_num(ax_pc.px(c.set_size))}" '
                       f'cy="{_num(ax_pc.py(c.pc))}" r="3" fill="{color}"/>')

        model_d = [(n, 2.0 * normal_quantile(pc)) for n, pc in pc_curves[lvl]
                   if pc > 0.5]
        model_d = [(n, d) for n, d in model_d if d_lo <= d <= d_hi]
        if len(model_d) >= 2:
            _polyline(out, [(ax_dp.px(n), ax_dp.py(d)) for n, d in model_d],
                      color, dashed=True)
        data_d = [(c.set_size, d.dprime) for c, d in pairs if d.dprime > 0]
        if len(data_d) >= 2:
            _polyline(out, [(ax_dp.px(n), ax_dp.py(d)) for n, d in data_d],
                      color, dashed=False)
        for n, d in data_d:
            out.append(f'<circle cx="{_num(ax_dp.px(n))}" cy="{_num(ax_dp.py(d))}" '
                       f'r="3" fill="{color}"/>')

    legend_x = PANEL_W - 40
    for i, lvl in enumerate(levels):
        y = PAD_T + 14 + 16 * i
        out.append(f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 22}" y2="{y}" '
                   f'stroke="{_color(lvl)}" stroke-width="2"/>')
        out.append(f'<text x="{legend_x + 27}" y="{y + 4}" font-size="11">'
                   f'level {lvl}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
