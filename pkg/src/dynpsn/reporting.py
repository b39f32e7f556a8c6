"""Report emission: comma-separated tables plus self-contained SVG charts.

Charts are hand-rolled vector graphics with the underlying numbers embedded
in an XML comment, so reports stay diff-able and dependency-free.
"""

from __future__ import annotations

import json
import statistics
import time
from pathlib import Path

from .evaluation import runtime_summary
from .pipeline import Layout, RunConfig, _require, _write_text, read_rates, write_metadata

_FONT = 'font-family="Helvetica,Arial,sans-serif"'


def _svg(width: int, height: int, body: list[str], data_comment: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    comment = "<!--\n" + data_comment.rstrip() + "\n-->"
    return "\n".join([head, comment, *body, "</svg>"]) + "\n"


_PALETTE = ["#4878a8", "#e49444", "#5ba053", "#b65c88", "#8a8a5c", "#7b6aa8"]


def bar_chart(path: Path, title: str, labels: list[str],
              series: dict[str, list[float]], y_label: str,
              y_max: float | None = None) -> None:
    """Grouped vertical bars; one group per label, one bar per series."""
    width, height = 640, 360
    ml, mr, mt, mb = 70, 20, 50, 90
    plot_w, plot_h = width - ml - mr, height - mt - mb
    names = list(series)
    vmax = y_max if y_max is not None else max(
        (max(v) for v in series.values() if v), default=1.0) or 1.0
    body = [f'<text x="{width / 2}" y="24" text-anchor="middle" {_FONT} '
            f'font-size="15">{title}</text>']
    body.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="#333"/>')
    body.append(f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" '
                f'y2="{mt + plot_h}" stroke="#333"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = mt + plot_h * (1 - frac)
        body.append(f'<line x1="{ml - 4}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="#333"/>')
        body.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" {_FONT} '
                    f'font-size="11">{vmax * frac:.3g}</text>')
    body.append(f'<text x="16" y="{mt + plot_h / 2:.1f}" {_FONT} font-size="12" '
                f'transform="rotate(-90 16 {mt + plot_h / 2:.1f})" '
                f'text-anchor="middle">{y_label}</text>')
    group_w = plot_w / max(1, len(labels))
    bar_w = group_w * 0.8 / max(1, len(names))
    for gi, lab in enumerate(labels):
        gx = ml + gi * group_w
        for si, name in enumerate(names):
            val = series[name][gi]
            h = plot_h * (val / vmax if vmax else 0)
            x = gx + group_w * 0.1 + si * bar_w
            y = mt + plot_h - h
            color = _PALETTE[si % len(_PALETTE)]
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                        f'height="{h:.1f}" fill="{color}"/>')
        body.append(f'<text x="{gx + group_w / 2:.1f}" y="{mt + plot_h + 14}" {_FONT} '
                    f'font-size="11" text-anchor="end" '
                    f'transform="rotate(-30 {gx + group_w / 2:.1f} {mt + plot_h + 14})">'
                    f'{lab}</text>')
    for si, name in enumerate(names):
        x = ml + si * 150
        y = height - 16
        color = _PALETTE[si % len(_PALETTE)]
        body.append(f'<rect x="{x}" y="{y - 10}" width="12" height="12" fill="{color}"/>')
        body.append(f'<text x="{x + 16}" y="{y}" {_FONT} font-size="11">{name}</text>')
    table = ["label," + ",".join(names)]
    for gi, lab in enumerate(labels):
        table.append(lab + "," + ",".join(f"{series[n][gi]:.17g}" for n in names))
    _write_text(path, _svg(width, height, body, "\n".join(table)))


def box_chart(path: Path, title: str, labels: list[str],
              samples: dict[str, list[float]], y_label: str) -> None:
    """One box (quartiles, median, whiskers at min/max) per label."""
    width, height = 640, 360
    ml, mr, mt, mb = 70, 20, 50, 90
    plot_w, plot_h = width - ml - mr, height - mt - mb
    vmax = max((max(v) for v in samples.values()), default=1.0) or 1.0
    vmax *= 1.05

    def ypix(v: float) -> float:
        return mt + plot_h * (1 - v / vmax)

    body = [f'<text x="{width / 2}" y="24" text-anchor="middle" {_FONT} '
            f'font-size="15">{title}</text>',
            f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="#333"/>',
            f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" '
            f'y2="{mt + plot_h}" stroke="#333"/>']
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = ypix(vmax * frac)
        body.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" {_FONT} '
                    f'font-size="11">{vmax * frac:.3g}</text>')
    body.append(f'<text x="16" y="{mt + plot_h / 2:.1f}" {_FONT} font-size="12" '
                f'transform="rotate(-90 16 {mt + plot_h / 2:.1f})" '
                f'text-anchor="middle">{y_label}</text>')
    group_w = plot_w / max(1, len(labels))
    rows = ["label,min,q1,median,q3,max"]
    for gi, lab in enumerate(labels):
        vals = sorted(samples[lab])
        if len(vals) == 1:
            q1 = med = q3 = vals[0]
        else:
            q1, med, q3 = statistics.quantiles(vals, n=4) if len(vals) >= 3 else (
                vals[0], statistics.median(vals), vals[-1])
        lo, hi = vals[0], vals[-1]
        cx = ml + gi * group_w + group_w / 2
        bw = min(40.0, group_w * 0.5)
        body.append(f'<line x1="{cx:.1f}" y1="{ypix(lo):.1f}" x2="{cx:.1f}" '
                    f'y2="{ypix(hi):.1f}" stroke="#333"/>')
        body.append(f'<rect x="{cx - bw / 2:.1f}" y="{ypix(q3):.1f}" width="{bw:.1f}" '
                    f'height="{max(0.5, ypix(q1) - ypix(q3)):.1f}" fill="#9bb7d4" '
                    f'stroke="#333"/>')
        body.append(f'<line x1="{cx - bw / 2:.1f}" y1="{ypix(med):.1f}" '
                    f'x2="{cx + bw / 2:.1f}" y2="{ypix(med):.1f}" stroke="#a03030" '
                    f'stroke-width="2"/>')
        body.append(f'<text x="{cx:.1f}" y="{mt + plot_h + 14}" {_FONT} font-size="11" '
                    f'text-anchor="end" transform="rotate(-30 {cx:.1f} '
                    f'{mt + plot_h + 14})">{lab}</text>')
        rows.append(f"{lab},{lo:.17g},{q1:.17g},{med:.17g},{q3:.17g},{hi:.17g}")
    _write_text(path, _svg(width, height, body, "\n".join(rows)))


def stage_report(config: RunConfig, rates_paths: list[str] = (),
                 metadata_paths: list[str] = ()) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    layout.report_dir.mkdir(parents=True, exist_ok=True)
    paths = [Path(p) for p in rates_paths] or [_require(layout.rates, "evaluate")]
    rates = read_rates(paths)
    datasets = sorted(rates)
    methods = sorted({m for ds in rates.values() for m in ds})

    # wide rates table
    lines = ["dataset_id," + ",".join(methods)]
    for ds in datasets:
        lines.append(ds + "," + ",".join(
            f"{rates[ds][m]:.17g}" if m in rates[ds] else "" for m in methods))
    _write_text(layout.report_dir / "rates_table.csv", "\n".join(lines) + "\n")

    # rank-1 bar chart from rank_summary.csv when present
    produced = ["rates_table.csv"]
    if layout.rank_summary.exists():
        per_policy: dict[str, dict[str, float]] = {}
        for ln in layout.rank_summary.read_text(encoding="utf-8").splitlines()[1:]:
            if not ln.strip():
                continue
            m, policy, pct, _a, _t = ln.split(",")
            per_policy.setdefault(policy, {})[m] = float(pct)
        series = {policy: [vals.get(m, 0.0) for m in methods]
                  for policy, vals in sorted(per_policy.items())}
        bar_chart(layout.report_dir / "rank1_bar.svg",
                  "datasets at rank 1 (%)", methods, series,
                  "% of datasets", y_max=100.0)
        produced.append("rank1_bar.svg")

    # misclassification distribution per method
    samples = {m: [rates[ds][m] for ds in datasets if m in rates[ds]] for m in methods}
    box_chart(layout.report_dir / "rates_box.svg",
              "misclassification over datasets", methods, samples, "aggregate rate")
    produced.append("rates_box.svg")

    # q-value matrix copy
    if layout.qvalues.exists():
        _write_text(layout.report_dir / "qvalues.csv",
                    layout.qvalues.read_text(encoding="utf-8"))
        produced.append("qvalues.csv")

    # runtime summaries from metadata files
    runtime_map: dict[str, list[float]] = {}
    meta_paths = [Path(p) for p in metadata_paths]
    if not meta_paths and layout.metadata_dir.exists():
        meta_paths = sorted(layout.metadata_dir.glob("*.json"))
    for mp in meta_paths:
        try:
            meta = json.loads(Path(mp).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        for method, secs in meta.get("method_runtimes", {}).items():
            runtime_map.setdefault(method, []).append(float(secs))
    if runtime_map:
        rows = ["method_id,n,median_seconds,mean_seconds,stdev_seconds,single_value"]
        med, mean = {}, {}
        for m in sorted(runtime_map):
            s = runtime_summary(runtime_map[m])
            rows.append(f"{m},{s.n},{s.median_seconds:.17g},{s.mean_seconds:.17g},"
                        f"{s.stdev_seconds:.17g},{int(s.single_value)}")
            med[m], mean[m] = s.median_seconds, s.mean_seconds
        _write_text(layout.report_dir / "runtime_summary.csv", "\n".join(rows) + "\n")
        ms = sorted(runtime_map)
        bar_chart(layout.report_dir / "runtime_bar.svg", "runtime per method (s)",
                  ms, {"median": [med[m] for m in ms], "mean": [mean[m] for m in ms]},
                  "seconds")
        produced += ["runtime_summary.csv", "runtime_bar.svg"]

    write_metadata(layout, "report", config, {"total": time.perf_counter() - t0}, paths)
    return {"produced": produced}
