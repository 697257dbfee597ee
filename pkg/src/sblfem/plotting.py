"""Semi-log convergence plots rendered directly as SVG.

Each (eps1, eps2) series contributes two polylines: log10 of the energy error
as a solid line and log10 of the balanced error as a dashed line, both versus
the polynomial degree.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .harness import SweepRow, parse_csv

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 170, 30, 55


def _series_label(eps1: float, eps2: float) -> str:
    return f"eps1={eps1:g}, eps2={eps2:g}"


def render_convergence_svg(rows: list[SweepRow]) -> str:
    """SVG text for the convergence plot of a sweep's rows."""
    if not rows:
        raise ConfigError("no data rows to plot")
    series: dict[tuple[float, float], list[SweepRow]] = {}
    for row in rows:
        series.setdefault((row.eps1, row.eps2), []).append(row)

    points = []
    for key, members in series.items():
        members.sort(key=lambda r: r.p)
        for r in members:
            if r.energy_error <= 0.0 or r.balanced_error <= 0.0:
                raise ConfigError(
                    f"cannot plot nonpositive error at p={r.p}, "
                    f"eps1={r.eps1:g}, eps2={r.eps2:g}"
                )
            points.append((r.p, np.log10(r.energy_error)))
            points.append((r.p, np.log10(r.balanced_error)))

    ps = [q[0] for q in points]
    ys = [q[1] for q in points]
    p_lo, p_hi = min(ps), max(ps)
    y_lo, y_hi = np.floor(min(ys)), np.ceil(max(ys))
    if p_hi == p_lo:
        p_hi = p_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1

    def sx(p):
        return MARGIN_L + (p - p_lo) / (p_hi - p_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    def sy(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN_L}" y1="{sy(y_lo)}" x2="{sx(p_hi)}" y2="{sy(y_lo)}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{sy(y_lo)}" x2="{MARGIN_L}" y2="{sy(y_hi)}" stroke="black"/>',
    ]
    for p in range(int(np.ceil(p_lo)), int(np.floor(p_hi)) + 1):
        parts.append(
            f'<line x1="{sx(p)}" y1="{sy(y_lo)}" x2="{sx(p)}" y2="{sy(y_lo) + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{sx(p)}" y="{sy(y_lo) + 18}" text-anchor="middle">{p}</text>'
        )
    for y in range(int(y_lo), int(y_hi) + 1):
        parts.append(
            f'<line x1="{MARGIN_L - 4}" y1="{sy(y)}" x2="{MARGIN_L}" y2="{sy(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{sy(y) + 4}" text-anchor="end">1e{y}</text>'
        )
    parts.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2}" y="{HEIGHT - 12}" '
        f'text-anchor="middle">polynomial degree p</text>'
    )
    parts.append(
        f'<text x="16" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(MARGIN_T + HEIGHT - MARGIN_B) / 2})">error</text>'
    )

    legend_y = MARGIN_T + 10
    for idx, (key, members) in enumerate(sorted(series.items())):
        color = _COLORS[idx % len(_COLORS)]
        solid = " ".join(
            f"{sx(r.p):.2f},{sy(np.log10(r.energy_error)):.2f}" for r in members
        )
        dashed = " ".join(
            f"{sx(r.p):.2f},{sy(np.log10(r.balanced_error)):.2f}" for r in members
        )
        parts.append(
            f'<polyline points="{solid}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<polyline points="{dashed}" fill="none" stroke="{color}" '
            f'stroke-width="1.5" stroke-dasharray="6,4"/>'
        )
        x0 = WIDTH - MARGIN_R + 10
        parts.append(
            f'<line x1="{x0}" y1="{legend_y}" x2="{x0 + 22}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x0 + 28}" y="{legend_y + 4}">{_series_label(*key)} energy</text>'
        )
        legend_y += 18
        parts.append(
            f'<line x1="{x0}" y1="{legend_y}" x2="{x0 + 22}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="1.5" stroke-dasharray="6,4"/>'
        )
        parts.append(
            f'<text x="{x0 + 28}" y="{legend_y + 4}">{_series_label(*key)} balanced</text>'
        )
        legend_y += 22

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(csv_text: str) -> str:
    """Parse sweep CSV text and render the convergence SVG."""
    return render_convergence_svg(parse_csv(csv_text))
