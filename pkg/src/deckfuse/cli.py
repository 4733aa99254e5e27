"""Command-line driver for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error. The DECKFUSE_STORE
environment variable provides the default for every --store flag.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import catalog, report, synth
from .catalog import IngestMode
from .errors import DeckfuseError
from .gateway import serve
from .geodesy import GeoBBox
from .projection import (
    CameraRig,
    default_mosaic_gsd,
    grid_for_footprint,
    load_camera_file,
    render_orthophoto,
    rig_to_dict,
)
from .raster import load_pnm, save_mask, save_pnm

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _store_default() -> str | None:
    return os.environ.get("DECKFUSE_STORE")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deckfuse", description="bridge-deck inspection image fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-phase inspection dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--pitch", type=float, default=45.0, help="camera depression, degrees")
    p.add_argument("--aperture", type=float, default=20.0, help="half-aperture, degrees")
    p.add_argument("--height", type=float, default=10.0, help="flight height, meters")
    p.add_argument("--overlap", type=float, default=0.6)
    p.add_argument("--gps-noise", type=float, default=0.0, help="geotag noise sigma, meters")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rows", type=int, default=791, help="image rows")
    p.add_argument("--cols", type=int, default=301, help="image columns")
    p.add_argument("--defects", type=int, default=5)
    p.add_argument("--bridge-id", default="synth-bridge")

    p = sub.add_parser("ipm", help="perspective-correct a single image")
    p.add_argument("--image", required=True)
    p.add_argument("--camera", required=True, help="camera parameter JSON file")
    p.add_argument("--gsd", type=float, required=True, help="meters per output pixel")
    p.add_argument("--out", required=True, help="output PNM path")

    p = sub.add_parser("stitch", help="phase-1 pipeline: stitch a manifest into a surface map")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", default=_store_default())
    p.add_argument("--map-id", default=None)
    p.add_argument("--tau", type=int, default=12, help="feature-path inlier acceptance threshold")

    p = sub.add_parser("ingest", help="phase-2 records: import defect entries")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", default=_store_default())
    p.add_argument("--mode", choices=["defects", "map"], default="defects")
    p.add_argument("--map-id", default=None)

    p = sub.add_parser("serve", help="run the HTTP API (and web client, when built)")
    p.add_argument("--store", default=_store_default())
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--webui", default=None, help="directory of built web client assets")

    p = sub.add_parser("query", help="query the catalog, JSON to stdout")
    p.add_argument("--store", default=_store_default())
    p.add_argument("--bbox", required=True, help="min_lat,min_lon,max_lat,max_lon")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--defects", action="store_true", default=False)
    kind.add_argument("--bridges", action="store_true", default=False)

    p = sub.add_parser("report", help="render condition-map and mosaic figures plus CSV tables")
    p.add_argument("--store", default=_store_default())
    p.add_argument("--out", required=True, help="output directory for figures and CSV")

    return parser


def _require_store(args, parser) -> Path:
    if not args.store:
        parser.error("--store is required (or set DECKFUSE_STORE)")
    return Path(args.store)


def _open_existing_store(path: Path) -> catalog.Store:
    if not path.is_dir():
        raise DeckfuseError(f"store directory {path} does not exist")
    return catalog.open_store(path)


def _cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "views").mkdir(parents=True, exist_ok=True)
    (out / "closeups").mkdir(parents=True, exist_ok=True)

    rig = CameraRig(
        l=0.0,
        d=0.0,
        h=args.height,
        theta=math.radians(args.pitch),
        gamma=0.0,
        alpha=math.radians(args.aperture),
        m=args.rows,
        n=args.cols,
    )
    gsd = default_mosaic_gsd(rig)
    span = synth.footprint_span_x(rig)
    fp_len = span[1] - span[0]
    deck_len = fp_len * (1.0 + (args.views - 1) * (1.0 - args.overlap))
    deck_wid = 14.0
    texel_per_m = max(10.0, math.ceil(1.5 / gsd))
    scene = synth.make_deck_scene(deck_len, deck_wid, texel_per_m, args.defects, args.seed)
    plan, shots = synth.make_flight(
        scene, rig, args.overlap, args.gps_noise, seed=args.seed + 1, n_views=args.views
    )

    camera_json = rig_to_dict(rig)
    phase1_entries = []
    for i, (view, tag) in enumerate(shots):
        name = f"views/view_{i:03d}.ppm"
        (out / name).write_bytes(save_pnm(view))
        phase1_entries.append(
            {"file": name, "geotag": catalog.geotag_to_json(tag), "camera": camera_json}
        )
    manifest1 = {
        "bridge_id": args.bridge_id,
        "phase": 1,
        "sensor": "optical",
        "images": phase1_entries,
    }
    (out / "manifest_phase1.json").write_text(json.dumps(manifest1, indent=2) + "\n")

    closeup_rig = rig_to_dict(
        CameraRig(0.0, 0.0, 1.5, math.pi / 2, 0.0, math.radians(30.0), 64, 64)
    )
    phase2_entries = []
    for k, (pt, kind) in enumerate(scene.defects):
        name = f"closeups/defect_{k:02d}.ppm"
        (out / name).write_bytes(save_pnm(synth.crop_closeup(scene, pt)))
        pos = synth.to_geo(synth.LocalPoint(east=pt.x, north=pt.y), scene.anchor)
        tag = {
            "lat": pos.lat,
            "lon": pos.lon,
            "alt_m": 1.5,
            "heading_deg": 0.0,
            "timestamp": f"2024-05-02T09:{k:02d}:00Z",
        }
        phase2_entries.append(
            {
                "file": name,
                "geotag": tag,
                "camera": closeup_rig,
                "note": f"{kind} confirmed by ground inspection at x={pt.x:.2f} m",
                "defect_type": kind,
            }
        )
    manifest2 = {
        "bridge_id": args.bridge_id,
        "phase": 2,
        "sensor": "hammer_sounding",
        "images": phase2_entries,
    }
    (out / "manifest_phase2.json").write_text(json.dumps(manifest2, indent=2) + "\n")

    (out / "camera.json").write_text(json.dumps(camera_json, indent=2) + "\n")
    truth = {
        "anchor": {"lat": scene.anchor.lat, "lon": scene.anchor.lon},
        "deck": {
            "x_min": scene.coverage.x_min,
            "y_min": scene.coverage.y_min,
            "x_max": scene.coverage.x_max,
            "y_max": scene.coverage.y_max,
        },
        "gsd_m": gsd,
        "footprint_len_m": plan.footprint_len_m,
        "spacing_m": plan.spacing_m,
        "overlap": plan.overlap,
        "waypoints": [{"l": l, "d": d} for l, d in plan.waypoints],
        "defects": [
            {
                "x": pt.x,
                "y": pt.y,
                "kind": kind,
                "lat": synth.to_geo(synth.LocalPoint(east=pt.x, north=pt.y), scene.anchor).lat,
                "lon": synth.to_geo(synth.LocalPoint(east=pt.x, north=pt.y), scene.anchor).lon,
            }
            for pt, kind in scene.defects
        ],
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    print(
        json.dumps(
            {
                "views": len(shots),
                "defects": len(scene.defects),
                "manifest_phase1": str(out / "manifest_phase1.json"),
                "manifest_phase2": str(out / "manifest_phase2.json"),
                "truth": str(out / "truth.json"),
            }
        )
    )
    return 0


def _cmd_ipm(args) -> int:
    image = load_pnm(Path(args.image).read_bytes())
    rig = load_camera_file(Path(args.camera).read_text())
    grid = grid_for_footprint(rig, args.gsd)
    ortho = render_orthophoto(rig, image, grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_pnm(ortho))
    mask_path = out.with_suffix(".mask.pgm")
    mask_path.write_bytes(save_mask(ortho))
    print(json.dumps({"out": str(out), "mask": str(mask_path), "rows": ortho.height, "cols": ortho.width}))
    return 0


def _load_manifest(path: Path) -> catalog.IngestManifest:
    obj = json.loads(path.read_text())
    return catalog.parse_manifest(obj, path.parent)


def _cmd_stitch(args, parser) -> int:
    store_path = _require_store(args, parser)
    store = catalog.open_store(store_path)
    manifest = _load_manifest(Path(args.manifest))
    rep = catalog.ingest_batch(
        store, manifest, IngestMode.STITCH_TO_MAP, tau=args.tau, map_id=args.map_id
    )
    print(json.dumps(rep.to_json()))
    return 0


def _cmd_ingest(args, parser) -> int:
    store_path = _require_store(args, parser)
    store = catalog.open_store(store_path)
    manifest = _load_manifest(Path(args.manifest))
    mode = IngestMode.DEFECT_RECORDS if args.mode == "defects" else IngestMode.STITCH_TO_MAP
    rep = catalog.ingest_batch(store, manifest, mode, map_id=args.map_id)
    print(json.dumps(rep.to_json()))
    return 0


def _cmd_query(args, parser) -> int:
    store_path = _require_store(args, parser)
    store = _open_existing_store(store_path)
    parts = args.bbox.split(",")
    if len(parts) != 4:
        parser.error("--bbox must be min_lat,min_lon,max_lat,max_lon")
    try:
        min_lat, min_lon, max_lat, max_lon = (float(v) for v in parts)
        bbox = GeoBBox(min_lat=min_lat, min_lon=min_lon, max_lat=max_lat, max_lon=max_lon)
    except ValueError as exc:
        raise DeckfuseError(f"bad bbox: {exc}") from exc
    if args.bridges:
        rows = [catalog.bridge_to_json(b) for b in catalog.query_bridges(store, bbox)]
    else:
        rows = [catalog.defect_to_json(d) for d in catalog.query_defects(store, bbox)]
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_report(args, parser) -> int:
    store_path = _require_store(args, parser)
    store = _open_existing_store(store_path)
    paths = report.render_report(store, Path(args.out))
    print(json.dumps({"written": [str(p) for p in paths]}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR

    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "ipm":
            return _cmd_ipm(args)
        if args.command == "stitch":
            return _cmd_stitch(args, parser)
        if args.command == "ingest":
            return _cmd_ingest(args, parser)
        if args.command == "serve":
            store_path = _require_store(args, parser)
            serve(store_path, args.port, host=args.host, webui_dir=args.webui)
            return 0
        if args.command == "query":
            return _cmd_query(args, parser)
        if args.command == "report":
            return _cmd_report(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    except (DeckfuseError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"deckfuse: {exc}", file=sys.stderr)
        return DATA_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
