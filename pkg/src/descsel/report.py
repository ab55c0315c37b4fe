"""CSV and SVG rendering for sweeps, ablation grids, score dumps.

CSV files are the authoritative artifacts: floats are written with 17
significant digits so parsing them back reproduces the values exactly.
Plots are self-contained SVG strings built here, no renderer needed.
"""
from __future__ import annotations

import csv
from datetime import datetime, timezone
from pathlib import Path

from .errors import DataError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


# ---------------------------------------------------------------------------
# minimal line chart

def _line_chart(
    series: list[tuple[str, list[float], list[float]]],
    xlabel: str,
    ylabel: str,
    title: str,
    baseline: float | None = None,
    width: int = 640,
    height: int = 440,
) -> str:
    left, right, top, bottom = 64, 24, 36, 48
    pw, ph = width - left - right, height - top - bottom

    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    if baseline is not None:
        ys = ys + [baseline]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * pw

    def py(y: float) -> float:
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" '
        f'stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" '
        f'text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>',
    ]
    for i in range(5):
        tx = x0 + i * (x1 - x0) / 4
        ty = y0 + i * (y1 - y0) / 4
        parts.append(
            f'<line x1="{px(tx):.2f}" y1="{top + ph}" x2="{px(tx):.2f}" '
            f'y2="{top + ph + 4}" stroke="black"/>'
            f'<text x="{px(tx):.2f}" y="{top + ph + 18}" '
            f'text-anchor="middle">{tx:.3g}</text>'
        )
        parts.append(
            f'<line x1="{left - 4}" y1="{py(ty):.2f}" x2="{left}" '
            f'y2="{py(ty):.2f}" stroke="black"/>'
            f'<text x="{left - 8}" y="{py(ty) + 4:.2f}" '
            f'text-anchor="end">{ty:.3g}</text>'
        )
    if baseline is not None:
        parts.append(
            f'<line x1="{left}" y1="{py(baseline):.2f}" x2="{left + pw}" '
            f'y2="{py(baseline):.2f}" stroke="gray" stroke-dasharray="6 4"/>'
        )
    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        for x, y in zip(sx, sy):
            parts.append(
                f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" '
                f'fill="{color}"/>'
            )
        parts.append(
            f'<text x="{left + pw - 4}" y="{top + 14 + 14 * i}" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# renderers

def render_sweep(
    sweep: dict, out_dir: str | Path, dataset: str, stamp: str | None = None
) -> dict[str, Path]:
    """w_cls accuracy curves plus the flat classname-only baseline."""
    curves = sweep.get("curves", [])
    if not curves:
        raise DataError("sweep payload has no curves")
    baseline = sweep.get("baseline_top1")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    csv_path = root / f"sweep_{dataset}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "w_cls", "top1"])
        for curve in curves:
            for w, top1 in curve["points"]:
                writer.writerow([curve["label"], fmt(w), fmt(top1)])
        if baseline is not None:
            writer.writerow(["cls_only_baseline", "", fmt(baseline)])

    series = [
        (c["label"], [p[0] for p in c["points"]], [p[1] for p in c["points"]])
        for c in curves
    ]
    svg_path = root / f"sweep_{dataset}_{stamp or timestamp()}.svg"
    svg_path.write_text(
        _line_chart(series, "w_cls", "top-1 accuracy",
                    f"{dataset}: classname weight sweep", baseline=baseline)
    )
    return {"csv": csv_path, "svg": svg_path}


def render_grid(grid: dict, out_dir: str | Path, dataset: str) -> dict[str, Path]:
    """n-by-k accuracy table; rows are probe counts, columns k values."""
    k_list, n_list, top1 = grid["k_list"], grid["n_list"], grid["top1"]
    if len(top1) != len(n_list) or any(len(row) != len(k_list) for row in top1):
        raise DataError("ragged grid: top1 must be |n_list| x |k_list|")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    csv_path = root / f"grid_{dataset}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n"] + [f"k={k}" for k in k_list])
        for n, row in zip(n_list, top1):
            writer.writerow([n] + [fmt(v) for v in row])
    return {"csv": csv_path}


def render_distinctiveness(
    dump: dict, out_dir: str | Path, dataset: str, stamp: str | None = None
) -> dict[str, Path]:
    """Ranked positive distinctiveness scores, one curve per candidate."""
    images = dump.get("images", {})
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    csv_path = root / f"distinct_{dataset}.csv"
    series: list[tuple[str, list[float], list[float]]] = []
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "class", "rank", "pool_id", "score"])
        for image_key in sorted(images):
            for classname, ranked in images[image_key].items():
                for rank, (pool_id, score) in enumerate(ranked):
                    writer.writerow([image_key, classname, rank, pool_id, fmt(score)])
                if ranked:
                    series.append((
                        f"{image_key}:{classname}",
                        list(range(len(ranked))),
                        [score for _, score in ranked],
                    ))
    svg_path = root / f"distinct_{dataset}_{stamp or timestamp()}.svg"
    svg_path.write_text(
        _line_chart(series, "rank", "distinctiveness",
                    f"{dataset}: ranked distinctiveness")
    )
    return {"csv": csv_path, "svg": svg_path}
