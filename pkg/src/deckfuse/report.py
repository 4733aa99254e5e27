"""Static inspection report: matplotlib figures plus delimited tables.

Renders a bridge-condition overview map and one annotated figure per stored
surface map, alongside bridges.csv and defects.csv, so inspection results can
be reviewed without running the web client.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .catalog import Store, geo_to_map_pixel
from .errors import OutOfBounds
from .geodesy import GeoPoint, to_local

MARKERS = {"crack": "x", "delamination": "o", "spall": "s", "other": "^"}


def _local_positions(points: list[GeoPoint], anchor: GeoPoint):
    xs, ys = [], []
    for p in points:
        lp = to_local(p, anchor)
        xs.append(lp.east)
        ys.append(lp.north)
    return xs, ys


def render_condition_map(store: Store, out_path: Path) -> Path:
    """Overview figure: one condition-colored flag per bridge, local meters."""
    fig, ax = plt.subplots(figsize=(8, 6))
    if store.bridges:
        bridges = [b for _, b in sorted(store.bridges.items())]
        anchor = bridges[0].location
        xs, ys = _local_positions([b.location for b in bridges], anchor)
        for b, x, y in zip(bridges, xs, ys):
            ax.plot(x, y, marker="v", markersize=14, color=b.flag_color, linestyle="none")
            ax.annotate(
                f"{b.name} ({b.condition})",
                (x, y),
                textcoords="offset points",
                xytext=(8, 6),
                fontsize=9,
            )
        ax.set_title("bridge condition overview")
    else:
        ax.set_title("bridge condition overview (empty store)")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.grid(True, alpha=0.3)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_map_figure(store: Store, map_id: str, out_path: Path) -> Path:
    """Mosaic figure with the bridge's defects marked at their map pixels."""
    meta, mosaic = store.maps[map_id]
    rgb = mosaic.pixels if mosaic.channels == 3 else np.repeat(mosaic.pixels, 3, axis=2)
    shown = rgb.astype(float) / 255.0
    if mosaic.mask is not None:
        shown = shown * mosaic.mask[:, :, None] + (~mosaic.mask)[:, :, None] * np.array(
            [0.08, 0.08, 0.12]
        )

    fig, ax = plt.subplots(figsize=(10, max(3.0, 10 * mosaic.height / max(1, mosaic.width))))
    ax.imshow(shown, interpolation="nearest")
    plotted = set()
    for defect_id, d in sorted(store.defects.items()):
        if d.bridge_id != meta.bridge_id:
            continue
        try:
            row, col = geo_to_map_pixel(meta, d.position)
        except OutOfBounds:
            continue
        marker = MARKERS.get(d.defect_type, "^")
        label = d.defect_type if d.defect_type not in plotted else None
        plotted.add(d.defect_type)
        ax.plot(col, row, marker=marker, color="red", markersize=9, fillstyle="none", linestyle="none", label=label)
    if plotted:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"{map_id} (bridge {meta.bridge_id}, phase {meta.phase}, {meta.sensor}, gsd {meta.gsd:.3f} m/px)")
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def write_tables(store: Store, out_dir: Path) -> list[Path]:
    """bridges.csv and defects.csv."""
    bridges_csv = out_dir / "bridges.csv"
    with bridges_csv.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bridge_id", "name", "lat", "lon", "condition", "flag_color", "surface_map_ids"])
        for _, b in sorted(store.bridges.items()):
            w.writerow(
                [b.bridge_id, b.name, b.location.lat, b.location.lon, b.condition, b.flag_color, ";".join(b.surface_map_ids)]
            )
    defects_csv = out_dir / "defects.csv"
    with defects_csv.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["defect_id", "bridge_id", "lat", "lon", "defect_type", "sensor", "note", "image_id"])
        for _, d in sorted(store.defects.items()):
            w.writerow(
                [d.defect_id, d.bridge_id, d.position.lat, d.position.lon, d.defect_type, d.sensor, d.note, d.image_id or ""]
            )
    return [bridges_csv, defects_csv]


def render_report(store: Store, out_dir: Path) -> list[Path]:
    """Write all report artifacts into out_dir; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [render_condition_map(store, out_dir / "condition_map.png")]
    for map_id in sorted(store.maps):
        written.append(render_map_figure(store, map_id, out_dir / f"map_{map_id}.png"))
    written.extend(write_tables(store, out_dir))
    return written
