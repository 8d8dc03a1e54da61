"""File formats: snapshot/report/fit JSON, zero and point CSVs, SVG scatters.

Floats are serialized through Python's shortest round-trip repr, so binary64
values survive a JSON round trip exactly.  Every artifact embeds the full
parameter set and seed needed to reproduce it (JSON fields, a ``#``-prefixed
metadata line in CSVs, a ``<desc>`` element in SVGs).
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable

import numpy as np

from . import __version__ as _version
from .estimators import EstimatorReport, EventSpec, RateFit
from .gaf import GafEvolution, GafSnapshot
from .toymodels import PointConfiguration
from .zeros import ZeroSet

__all__ = [
    "snapshot_to_dict",
    "snapshot_from_dict",
    "evolution_to_dict",
    "evolution_from_dict",
    "spec_to_dict",
    "spec_from_dict",
    "report_to_dict",
    "report_from_dict",
    "ratefit_to_dict",
    "dumps",
    "zeros_csv",
    "points_csv",
    "estimates_csv",
    "svg_scatter",
]


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, newline-terminated."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# snapshots


def snapshot_to_dict(s: GafSnapshot) -> dict:
    return {
        "time": s.time,
        "trunc_degree": s.trunc_degree,
        "valid_radius": s.valid_radius,
        "tail_eps": s.tail_eps,
        "coeffs": [[float(c.real), float(c.imag)] for c in s.coeffs],
    }


def snapshot_from_dict(d: dict) -> GafSnapshot:
    coeffs = np.array([complex(re, im) for re, im in d["coeffs"]], dtype=np.complex128)
    return GafSnapshot(
        time=float(d["time"]),
        coeffs=coeffs,
        trunc_degree=int(d["trunc_degree"]),
        valid_radius=float(d["valid_radius"]),
        tail_eps=float(d["tail_eps"]),
    )


def evolution_to_dict(ev: GafEvolution, meta: dict | None = None) -> dict:
    out = {
        "grid_step": ev.grid_step,
        "snapshots": [snapshot_to_dict(s) for s in ev.snapshots],
        "software_version": _version,
    }
    if meta:
        out["meta"] = meta
    return out


def evolution_from_dict(d: dict) -> GafEvolution:
    return GafEvolution(
        snapshots=tuple(snapshot_from_dict(s) for s in d["snapshots"]),
        grid_step=float(d["grid_step"]),
    )


# ---------------------------------------------------------------------------
# estimator reports and rate fits


def spec_to_dict(spec: EventSpec) -> dict:
    return {
        "kind": spec.kind,
        "model": spec.model,
        "R": spec.radius,
        "N": spec.min_count,
        "T": spec.horizon,
        "delta": spec.grid_step,
    }


def spec_from_dict(d: dict) -> EventSpec:
    return EventSpec(
        kind=d["kind"],
        model=d["model"],
        radius=float(d["R"]),
        horizon=float(d["T"]),
        grid_step=float(d["delta"]),
        min_count=None if d.get("N") is None else int(d["N"]),
    )


def report_to_dict(r: EstimatorReport) -> dict:
    return {
        "spec": spec_to_dict(r.spec),
        "n_samples": r.n_samples,
        "successes": r.successes,
        "p_hat": r.p_hat,
        "ci": [r.ci_low, r.ci_high],
        "log_p_hat": r.log_p_hat,
        "one_sided": r.one_sided,
        "seed_root": r.seed_root,
        "delta": r.spec.grid_step,
        "software_version": _version,
    }


def report_from_dict(d: dict) -> EstimatorReport:
    return EstimatorReport(
        spec=spec_from_dict(d["spec"]),
        n_samples=int(d["n_samples"]),
        successes=int(d["successes"]),
        p_hat=float(d["p_hat"]),
        ci_low=float(d["ci"][0]),
        ci_high=float(d["ci"][1]),
        log_p_hat=float(d["log_p_hat"]),
        seed_root=int(d["seed_root"]),
        one_sided=bool(d.get("one_sided", False)),
    )


def ratefit_to_dict(fit: RateFit, context: dict | None = None) -> dict:
    out = {
        "T_values": list(fit.T_values),
        "log_p": list(fit.log_p),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "software_version": _version,
    }
    if context:
        out["context"] = context
    return out


# ---------------------------------------------------------------------------
# CSV artifacts (one '#'-prefixed metadata line, then header + rows)


def _csv_text(meta: dict, header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def zeros_csv(entries: list[tuple[int, float, ZeroSet]], meta: dict) -> str:
    """Rows (sample_id, time, re, im, disk_radius, method, residual)."""
    rows = []
    for sample_id, time, zs in entries:
        for z in zs.zeros:
            rows.append(
                [sample_id, repr(time), repr(z.real), repr(z.imag), repr(zs.disk_radius), zs.method, repr(zs.max_residual)]
            )
    return _csv_text(meta, ["sample_id", "time", "re", "im", "disk_radius", "method", "residual"], rows)


def points_csv(entries: list[tuple[int, list[PointConfiguration]]], model: str, meta: dict) -> str:
    """Rows (sample_id, time, label, re, im, model)."""
    rows = []
    for sample_id, cfgs in entries:
        for cfg in cfgs:
            for label, pos in cfg.points:
                rows.append([sample_id, repr(cfg.time), label, repr(pos.real), repr(pos.imag), model])
    return _csv_text(meta, ["sample_id", "time", "label", "re", "im", "model"], rows)


def estimates_csv(points: list[dict], meta: dict) -> str:
    """Rows (T, n_samples, successes, p_hat, ci_low, ci_high) for plotting."""
    rows = [
        [repr(float(p["T"])), p["n_samples"], p["successes"], repr(p["p_hat"]), repr(p["ci_low"]), repr(p["ci_high"])]
        for p in points
    ]
    return _csv_text(meta, ["T", "n_samples", "successes", "p_hat", "ci_low", "ci_high"], rows)


# ---------------------------------------------------------------------------
# SVG scatter of points in a disk


_PANEL = 420
_PAD = 20


def _panel_svg(offset_x: int, title: str, pts: list[complex], radius: float, marker_class: str) -> list[str]:
    cx = offset_x + _PANEL / 2
    cy = _PAD + (_PANEL - 2 * _PAD) / 2
    rr = (_PANEL - 2 * _PAD) / 2
    out = [
        f'<circle class="disk" cx="{cx:.2f}" cy="{cy:.2f}" r="{rr:.2f}" fill="none" stroke="black"/>',
        f'<text x="{cx:.2f}" y="{_PANEL - 2:.2f}" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for z in pts:
        px = cx + rr * z.real / radius
        py = cy - rr * z.imag / radius
        out.append(f'<circle class="{marker_class}" cx="{px:.4f}" cy="{py:.4f}" r="2.5"/>')
    return out


def svg_scatter(panels: list[tuple[str, list[complex]]], radius: float, meta: dict) -> str:
    """Side-by-side disks with one marker per point; structural and diffable."""
    width = _PANEL * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{_PANEL}" viewBox="0 0 {width} {_PANEL}">',
        "<desc>" + json.dumps(meta, sort_keys=True) + "</desc>",
    ]
    for i, (title, pts) in enumerate(panels):
        parts.extend(_panel_svg(i * _PANEL, title, pts, radius, marker_class="pt"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
