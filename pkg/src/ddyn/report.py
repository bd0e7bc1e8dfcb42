"""Deterministic CSV tables and optional SVG sketches of analysis results."""

import math
from typing import Iterable, List, Sequence

import numpy as np

from .metrics import ForcePolytope, InertiaTensorResult, SweepRow

SWEEP_HEADER = ("eta_f", "eta_b", "fc_fwd_norm", "fc_bwd_norm", "imf")


def fmt(x) -> str:
    """Nine significant digits; ``inf``/``-inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"  # folds -0.0
    return f"{x:.9g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def git_csv(results: Sequence[InertiaTensorResult]) -> str:
    k = results[0].tensor.shape[0]
    header = ["variant"] + [f"h{i}{j}" for i in range(k) for j in range(k)]
    return csv_text(header, ([r.variant.value] + list(r.tensor.ravel()) for r in results))


def fc_csv(polytopes: Sequence[ForcePolytope]) -> str:
    rows = []
    for p in polytopes:
        for i, v in enumerate(p.vertices):
            fz = v[1] if len(v) > 1 else 0.0
            rows.append([p.variant.value, str(i), v[0], fz])
    return csv_text(["variant", "vertex", "fx", "fz"], rows)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    return csv_text(SWEEP_HEADER, ([r.eta_f, r.eta_b, r.fc_fwd_norm, r.fc_bwd_norm, r.imf] for r in rows))


# SVG -------------------------------------------------------------------

_COLORS = {"conventional": "#444444", "forward": "#1f77b4", "backward": "#d62728"}
_SIZE = 400


def _svg(body: List[str]) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>'] + body + ["</svg>", ""])


def _pts(xy) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in xy)


def _fit(points: np.ndarray):
    """Map world points (x right, z up) into the square canvas."""
    span = float(np.max(np.abs(points))) or 1.0
    scale = 0.45 * _SIZE / span
    c = _SIZE / 2
    return lambda p: np.column_stack([c + scale * p[:, 0], c - scale * p[:, 1]])


def _legend(names) -> List[str]:
    return [
        f'<text x="10" y="{20 + 16 * i}" font-size="12" fill="{_COLORS.get(n, "black")}">{n}</text>'
        for i, n in enumerate(names)
    ]


def git_svg(results: Sequence[InertiaTensorResult]) -> str:
    """Ellipses of n^T sym(G) n over unit directions n."""
    th = np.linspace(0, 2 * np.pi, 181)
    n = np.column_stack([np.cos(th), np.sin(th)])
    curves = []
    for r in results:
        S = r.symmetric_part
        if S.shape != (2, 2):
            continue
        radius = np.einsum("ki,ij,kj->k", n, S, n)
        curves.append((r.variant.value, n * radius[:, None]))
    if not curves:
        return _svg([])
    to_px = _fit(np.vstack([c for _, c in curves]))
    body = [
        f'<polyline fill="none" stroke="{_COLORS[name]}" points="{_pts(to_px(c))}"/>' for name, c in curves
    ]
    return _svg(body + _legend([name for name, _ in curves]))


def fc_svg(polytopes: Sequence[ForcePolytope]) -> str:
    polys = [p for p in polytopes if p.vertices.shape[1] == 2]
    if not polys:
        return _svg([])
    to_px = _fit(np.vstack([p.vertices for p in polys]))
    body = [
        f'<polygon fill="none" stroke="{_COLORS[p.variant.value]}" points="{_pts(to_px(p.vertices))}"/>'
        for p in polys
    ]
    return _svg(body + _legend([p.variant.value for p in polys]))


def sweep_svg(rows: Sequence[SweepRow], map_label: str = "") -> str:
    """Normalized capabilities and IMF against eta_f; infinite values clipped."""
    x = np.array([r.eta_f for r in rows])
    series = {
        "forward": np.array([r.fc_fwd_norm for r in rows]),
        "backward": np.array([r.fc_bwd_norm for r in rows]),
        "conventional": np.array([r.imf for r in rows]),
    }
    finite = np.concatenate([s[np.isfinite(s)] for s in series.values()])
    top = min(float(finite.max()) if finite.size else 1.0, 10.0)
    x0, x1 = float(x.min()), float(x.max())
    pad = 40

    def px(xs, ys):
        u = pad + (xs - x0) / ((x1 - x0) or 1.0) * (_SIZE - 2 * pad)
        v = _SIZE - pad - np.clip(ys, 0, top) / top * (_SIZE - 2 * pad)
        return np.column_stack([u, v])

    body = [f'<rect x="{pad}" y="{pad}" width="{_SIZE - 2 * pad}" height="{_SIZE - 2 * pad}" fill="none" stroke="#bbbbbb"/>']
    for name, ys in series.items():
        ok = np.isfinite(ys)
        body.append(f'<polyline fill="none" stroke="{_COLORS[name]}" points="{_pts(px(x[ok], ys[ok]))}"/>')
    labels = ["fc forward / conventional", "fc backward / conventional", "imf"]
    body += [
        f'<text x="{pad + 5}" y="{pad + 15 + 16 * i}" font-size="12" fill="{c}">{t}</text>'
        for i, (t, c) in enumerate(zip(labels, (_COLORS["forward"], _COLORS["backward"], _COLORS["conventional"])))
    ]
    body.append(f'<text x="{pad}" y="{_SIZE - 10}" font-size="12">eta_f {fmt(x0)} .. {fmt(x1)}, y clipped at {fmt(top)}</text>')
    if map_label:
        body.append(f'<text x="{pad}" y="{pad - 10}" font-size="12">eta_b map: {map_label}</text>')
    return _svg(body)
