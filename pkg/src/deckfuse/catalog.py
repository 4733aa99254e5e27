"""Persistent two-layer inspection catalog: bridges/surface maps and defects.

The store is a flat directory of JSON indexes plus PNM blobs so fixtures stay
diff-able and durability reduces to write-temp-then-rename. Single writer,
many readers; the gateway serializes mutations.

Layout (relative to the store root):
    bridges.json                    array of bridge records
    maps/<map_id>/meta.json         surface map metadata
    maps/<map_id>/mosaic.ppm        P6 mosaic
    maps/<map_id>/mask.pgm          P5 validity mask (255 valid)
    defects.json                    array of defect records
    defect_images/<image_id>.ppm    defect close-ups
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    CorruptStore,
    DuplicateId,
    EmptyInput,
    IoFailure,
    MissingFile,
    OutOfBounds,
)
from .geodesy import (
    GeoBBox,
    GeoPoint,
    ImageGeoTag,
    LocalPoint,
    bbox_contains,
    to_geo,
    to_local,
)
from .projection import (
    apply_range_mask,
    default_mosaic_gsd,
    grid_for_wedge,
    render_orthophoto,
    rig_from_dict,
    sharpness_range_limit,
)
from .raster import Raster, load_pnm, mask_from_raster, save_mask, save_pnm, to_rgb
from .stitcher import (
    RegistrationMethod,
    Similarity2D,
    composite,
    register_pair,
)

CONDITIONS = ("Good", "Fair", "Poor")
CONDITION_COLORS = {"Good": "green", "Fair": "yellow", "Poor": "red"}
SENSORS = ("optical", "infrared", "hammer_sounding", "other")
DEFECT_TYPES = ("crack", "delamination", "spall", "other")

# per-view orthophotos are cropped to ground whose along-track smear stays
# within this factor of the mosaic gsd
MAX_SMEAR_FACTOR = 8.0


@dataclass(frozen=True)
class BridgeRecord:
    """Map-layer entry: one bridge with its condition flag and surface maps."""

    bridge_id: str
    name: str
    location: GeoPoint
    condition: str
    surface_map_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")

    @property
    def flag_color(self) -> str:
        return CONDITION_COLORS[self.condition]


@dataclass(frozen=True)
class SurfaceMapMeta:
    """Catalog metadata of one stored orthomosaic."""

    map_id: str
    bridge_id: str
    phase: int
    sensor: str
    anchor: GeoPoint
    anchor_pixel: tuple[float, float]  # (row, col)
    gsd: float
    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.gsd <= 0:
            raise ValueError("gsd must be positive")
        if self.phase not in (1, 2):
            raise ValueError("phase must be 1 or 2")
        r, c = self.anchor_pixel
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ValueError("anchor pixel must lie within the mosaic")


@dataclass(frozen=True)
class DefectRecord:
    """Defects-layer entry: one geotagged inspection note."""

    defect_id: str
    bridge_id: str
    position: GeoPoint
    defect_type: str
    sensor: str
    note: str = ""
    image_id: Optional[str] = None


@dataclass(frozen=True)
class ManifestEntry:
    file: Path
    geotag: ImageGeoTag
    camera: dict
    note: Optional[str] = None
    defect_type: Optional[str] = None


@dataclass(frozen=True)
class IngestManifest:
    bridge_id: str
    phase: int
    sensor: str
    images: tuple[ManifestEntry, ...]


class IngestMode(str, Enum):
    STITCH_TO_MAP = "stitch_to_map"
    DEFECT_RECORDS = "defect_records"


@dataclass
class IngestReport:
    mode: IngestMode
    map_ids: list[str] = field(default_factory=list)
    defect_ids: list[str] = field(default_factory=list)
    registration_methods: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "map_ids": self.map_ids,
            "defect_ids": self.defect_ids,
            "registration_methods": self.registration_methods,
        }


@dataclass
class Store:
    """In-memory view of a catalog directory."""

    root: Path
    bridges: dict[str, BridgeRecord] = field(default_factory=dict)
    maps: dict[str, tuple[SurfaceMapMeta, Raster]] = field(default_factory=dict)
    defects: dict[str, DefectRecord] = field(default_factory=dict)
    defect_images: dict[str, Raster] = field(default_factory=dict)


# --- JSON record codecs ---------------------------------------------------


def bridge_to_json(b: BridgeRecord) -> dict:
    return {
        "bridge_id": b.bridge_id,
        "name": b.name,
        "lat": b.location.lat,
        "lon": b.location.lon,
        "condition": b.condition,
        "surface_map_ids": list(b.surface_map_ids),
    }


def bridge_from_json(obj: dict) -> BridgeRecord:
    try:
        return BridgeRecord(
            bridge_id=str(obj["bridge_id"]),
            name=str(obj["name"]),
            location=GeoPoint(float(obj["lat"]), float(obj["lon"])),
            condition=str(obj["condition"]),
            surface_map_ids=tuple(str(s) for s in obj["surface_map_ids"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptStore(f"bad bridge record: {exc}") from exc


def meta_to_json(m: SurfaceMapMeta) -> dict:
    return {
        "map_id": m.map_id,
        "bridge_id": m.bridge_id,
        "phase": m.phase,
        "sensor": m.sensor,
        "anchor_lat": m.anchor.lat,
        "anchor_lon": m.anchor.lon,
        "anchor_row": m.anchor_pixel[0],
        "anchor_col": m.anchor_pixel[1],
        "gsd_m": m.gsd,
        "rows": m.rows,
        "cols": m.cols,
    }


def meta_from_json(obj: dict) -> SurfaceMapMeta:
    try:
        return SurfaceMapMeta(
            map_id=str(obj["map_id"]),
            bridge_id=str(obj["bridge_id"]),
            phase=int(obj["phase"]),
            sensor=str(obj["sensor"]),
            anchor=GeoPoint(float(obj["anchor_lat"]), float(obj["anchor_lon"])),
            anchor_pixel=(float(obj["anchor_row"]), float(obj["anchor_col"])),
            gsd=float(obj["gsd_m"]),
            rows=int(obj["rows"]),
            cols=int(obj["cols"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptStore(f"bad surface map meta: {exc}") from exc


def defect_to_json(d: DefectRecord) -> dict:
    return {
        "defect_id": d.defect_id,
        "bridge_id": d.bridge_id,
        "lat": d.position.lat,
        "lon": d.position.lon,
        "defect_type": d.defect_type,
        "sensor": d.sensor,
        "note": d.note,
        "image_id": d.image_id,
    }


def defect_from_json(obj: dict) -> DefectRecord:
    try:
        return DefectRecord(
            defect_id=str(obj["defect_id"]),
            bridge_id=str(obj["bridge_id"]),
            position=GeoPoint(float(obj["lat"]), float(obj["lon"])),
            defect_type=str(obj["defect_type"]),
            sensor=str(obj["sensor"]),
            note=str(obj.get("note") or ""),
            image_id=(None if obj.get("image_id") is None else str(obj["image_id"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptStore(f"bad defect record: {exc}") from exc


def geotag_from_json(obj: dict) -> ImageGeoTag:
    return ImageGeoTag(
        lat=float(obj["lat"]),
        lon=float(obj["lon"]),
        alt_m=float(obj["alt_m"]),
        heading_deg=float(obj["heading_deg"]),
        timestamp=str(obj["timestamp"]),
    )


def geotag_to_json(tag: ImageGeoTag) -> dict:
    return {
        "lat": tag.lat,
        "lon": tag.lon,
        "alt_m": tag.alt_m,
        "heading_deg": tag.heading_deg,
        "timestamp": tag.timestamp,
    }


def parse_manifest(obj: dict, base_dir: Path) -> IngestManifest:
    """Decode an ingest manifest; file paths resolve relative to base_dir."""
    try:
        entries = []
        for e in obj["images"]:
            entries.append(
                ManifestEntry(
                    file=(base_dir / str(e["file"])).resolve(),
                    geotag=geotag_from_json(e["geotag"]),
                    camera=dict(e["camera"]),
                    note=e.get("note"),
                    defect_type=e.get("defect_type"),
                )
            )
        return IngestManifest(
            bridge_id=str(obj["bridge_id"]),
            phase=int(obj["phase"]),
            sensor=str(obj["sensor"]),
            images=tuple(entries),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad ingest manifest: {exc}") from exc


# --- store IO ----------------------------------------------------------------


def open_store(path) -> Store:
    """Load (or initialize) a catalog directory."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create store at {root}: {exc}") from exc

    store = Store(root=root)
    bridges_file = root / "bridges.json"
    if bridges_file.exists():
        for obj in _read_json_array(bridges_file):
            rec = bridge_from_json(obj)
            store.bridges[rec.bridge_id] = rec
    defects_file = root / "defects.json"
    if defects_file.exists():
        for obj in _read_json_array(defects_file):
            rec = defect_from_json(obj)
            store.defects[rec.defect_id] = rec

    maps_dir = root / "maps"
    if maps_dir.is_dir():
        for map_dir in sorted(p for p in maps_dir.iterdir() if p.is_dir()):
            meta_file = map_dir / "meta.json"
            if not meta_file.exists():
                raise CorruptStore(f"{map_dir} has no meta.json")
            meta = meta_from_json(_read_json_object(meta_file))
            mosaic = _read_pnm_file(map_dir / "mosaic.ppm")
            mask_file = map_dir / "mask.pgm"
            if mask_file.exists():
                mosaic = mosaic.with_mask(mask_from_raster(_read_pnm_file(mask_file)))
            store.maps[meta.map_id] = (meta, mosaic)

    img_dir = root / "defect_images"
    if img_dir.is_dir():
        for f in sorted(img_dir.glob("*.ppm")):
            store.defect_images[f.stem] = _read_pnm_file(f)
    return store


def persist(store: Store) -> None:
    """Write the whole store back to disk, atomically per file."""
    try:
        store.root.mkdir(parents=True, exist_ok=True)
        _atomic_write(
            store.root / "bridges.json",
            _json_bytes([bridge_to_json(b) for _, b in sorted(store.bridges.items())]),
        )
        _atomic_write(
            store.root / "defects.json",
            _json_bytes([defect_to_json(d) for _, d in sorted(store.defects.items())]),
        )
        for map_id, (meta, mosaic) in sorted(store.maps.items()):
            map_dir = store.root / "maps" / map_id
            map_dir.mkdir(parents=True, exist_ok=True)
            _atomic_write(map_dir / "meta.json", _json_bytes(meta_to_json(meta)))
            _atomic_write(map_dir / "mosaic.ppm", save_pnm(to_rgb(mosaic)))
            _atomic_write(map_dir / "mask.pgm", save_mask(mosaic))
        img_dir = store.root / "defect_images"
        if store.defect_images:
            img_dir.mkdir(parents=True, exist_ok=True)
        for image_id, img in sorted(store.defect_images.items()):
            _atomic_write(img_dir / f"{image_id}.ppm", save_pnm(to_rgb(img)))
    except OSError as exc:
        raise IoFailure(f"cannot persist store at {store.root}: {exc}") from exc


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, indent=2, sort_keys=True).encode() + b"\n"


def _read_json_array(path: Path) -> list:
    data = _read_json(path)
    if not isinstance(data, list):
        raise CorruptStore(f"{path} must hold a JSON array")
    return data


def _read_json_object(path: Path) -> dict:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise CorruptStore(f"{path} must hold a JSON object")
    return data


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptStore(f"unparseable {path}: {exc}") from exc


def _read_pnm_file(path: Path) -> Raster:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorruptStore(f"missing raster blob {path}: {exc}") from exc
    try:
        return load_pnm(data)
    except Exception as exc:
        raise CorruptStore(f"bad raster blob {path}: {exc}") from exc


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# --- queries & mutation ------------------------------------------------------


def query_defects(store: Store, bbox: GeoBBox) -> list[DefectRecord]:
    """Defect records inside the bbox, ordered by defect_id."""
    return [
        d
        for _, d in sorted(store.defects.items())
        if bbox_contains(bbox, d.position)
    ]


def query_bridges(store: Store, bbox: GeoBBox) -> list[BridgeRecord]:
    """Bridge records inside the bbox, ordered by bridge_id."""
    return [
        b
        for _, b in sorted(store.bridges.items())
        if bbox_contains(bbox, b.location)
    ]


def add_bridge(store: Store, record: BridgeRecord, save: bool = True) -> None:
    if record.bridge_id in store.bridges:
        raise DuplicateId(f"bridge {record.bridge_id} already exists")
    store.bridges[record.bridge_id] = record
    if save:
        persist(store)


def add_defect(
    store: Store, record: DefectRecord, image: Optional[Raster] = None, save: bool = True
) -> DefectRecord:
    """Store a defect record and (optionally) its close-up image."""
    if record.defect_id in store.defects:
        raise DuplicateId(f"defect {record.defect_id} already exists")
    if image is not None:
        image_id = record.image_id or record.defect_id
        record = replace(record, image_id=image_id)
        store.defect_images[image_id] = to_rgb(image)
    store.defects[record.defect_id] = record
    if save:
        persist(store)
    return record


def map_pixel_to_geo(meta: SurfaceMapMeta, row: float, col: float) -> GeoPoint:
    """Geographic position of a mosaic pixel."""
    if not (0 <= row < meta.rows and 0 <= col < meta.cols):
        raise OutOfBounds(f"pixel ({row}, {col}) outside {meta.rows}x{meta.cols} mosaic")
    east = (col - meta.anchor_pixel[1]) * meta.gsd
    north = (meta.anchor_pixel[0] - row) * meta.gsd
    return to_geo(LocalPoint(east=east, north=north), meta.anchor)


def geo_to_map_pixel(meta: SurfaceMapMeta, p: GeoPoint) -> tuple[float, float]:
    """Mosaic (row, col) of a geographic position; OutOfBounds outside the extent."""
    local = to_local(p, meta.anchor)
    col = meta.anchor_pixel[1] + local.east / meta.gsd
    row = meta.anchor_pixel[0] - local.north / meta.gsd
    if not (0 <= row < meta.rows and 0 <= col < meta.cols):
        raise OutOfBounds(f"{p} outside mosaic {meta.map_id}")
    return row, col


# --- batch ingestion ------------------------------------------------------


def ingest_batch(
    store: Store,
    manifest: IngestManifest,
    mode: IngestMode,
    tau: int = 12,
    map_id: Optional[str] = None,
) -> IngestReport:
    """Run a phase-1 stitch or a phase-2 defect import; all-or-nothing.

    Every referenced file is checked before any work starts and the store is
    mutated (and persisted) only after the whole batch succeeds.
    """
    if not manifest.images:
        raise EmptyInput("manifest lists no images")
    for entry in manifest.images:
        if not entry.file.exists():
            raise MissingFile(str(entry.file))

    if mode is IngestMode.STITCH_TO_MAP:
        return _ingest_stitch(store, manifest, tau, map_id)
    return _ingest_defects(store, manifest)


def _next_id(existing, prefix: str) -> str:
    k = len(existing) + 1
    while f"{prefix}{k:04d}" in existing:
        k += 1
    return f"{prefix}{k:04d}"


def _ensure_bridge(store: Store, bridge_id: str, location: GeoPoint) -> None:
    if bridge_id not in store.bridges:
        store.bridges[bridge_id] = BridgeRecord(
            bridge_id=bridge_id, name=bridge_id, location=location, condition="Fair"
        )


def _ingest_stitch(
    store: Store, manifest: IngestManifest, tau: int, map_id: Optional[str]
) -> IngestReport:
    map_id = map_id or _next_id(store.maps, "map-")
    if map_id in store.maps:
        raise DuplicateId(f"map {map_id} already exists")

    views = []
    for entry in manifest.images:
        raster = load_pnm(entry.file.read_bytes())
        rig = rig_from_dict(entry.camera)
        views.append((raster, rig, entry.geotag))

    anchor = views[0][2].point()
    rig0 = views[0][1]
    gsd = default_mosaic_gsd(rig0)

    orthos = []
    origins = []  # per-view grid origin relative to its camera position
    for raster, rig, _tag in views:
        # keep only ground whose along-track smear stays bounded; the blurry
        # far field degrades both registration and the mosaic
        rho_limit = sharpness_range_limit(rig, gsd, MAX_SMEAR_FACTOR)
        grid = grid_for_wedge(rig, gsd, rho_limit)
        ortho = render_orthophoto(rig, raster, grid)
        orthos.append(apply_range_mask(ortho, grid, rig, rho_limit))
        origins.append((grid.origin.east - rig.l, grid.origin.north - rig.d))

    placed = [(orthos[0], Similarity2D.identity())]
    methods = ["base"]
    chain = Similarity2D.identity()
    for i in range(1, len(views)):
        result = register_pair(
            orthos[i - 1],
            orthos[i],
            views[i - 1][2],
            views[i][2],
            gsd,
            anchor,
            tau=tau,
            max_features=2000,
        )
        step = result.transform
        if result.method is RegistrationMethod.GPS_FALLBACK:
            # gps_offset relates camera positions; correct for any difference
            # in the grids' camera-relative origins (zero for a common rig)
            step = Similarity2D(
                step.scale,
                step.rotation,
                step.tx + (origins[i][0] - origins[i - 1][0]) / gsd,
                step.ty - (origins[i][1] - origins[i - 1][1]) / gsd,
            )
        chain = chain.compose(step)
        placed.append((orthos[i], chain))
        methods.append(result.method.value)

    map_anchor = to_geo(
        LocalPoint(east=origins[0][0] + rig0.l, north=origins[0][1] + rig0.d), anchor
    )
    surface = composite(placed, map_anchor, gsd)
    mosaic = to_rgb(surface.raster)
    meta = SurfaceMapMeta(
        map_id=map_id,
        bridge_id=manifest.bridge_id,
        phase=manifest.phase,
        sensor=manifest.sensor,
        anchor=surface.anchor,
        anchor_pixel=surface.anchor_pixel,
        gsd=gsd,
        rows=mosaic.height,
        cols=mosaic.width,
    )

    _ensure_bridge(store, manifest.bridge_id, anchor)
    bridge = store.bridges[manifest.bridge_id]
    store.bridges[manifest.bridge_id] = replace(
        bridge, surface_map_ids=bridge.surface_map_ids + (map_id,)
    )
    store.maps[map_id] = (meta, mosaic)
    persist(store)
    return IngestReport(
        mode=IngestMode.STITCH_TO_MAP, map_ids=[map_id], registration_methods=methods
    )


def _ingest_defects(store: Store, manifest: IngestManifest) -> IngestReport:
    loaded = [load_pnm(entry.file.read_bytes()) for entry in manifest.images]

    new_defects = {}
    new_images = {}
    taken = set(store.defects)
    for entry, img in zip(manifest.images, loaded):
        defect_id = _next_id(taken, f"{manifest.bridge_id}-defect-")
        taken.add(defect_id)
        new_defects[defect_id] = DefectRecord(
            defect_id=defect_id,
            bridge_id=manifest.bridge_id,
            position=entry.geotag.point(),
            defect_type=entry.defect_type or "other",
            sensor=manifest.sensor,
            note=entry.note or "",
            image_id=defect_id,
        )
        new_images[defect_id] = to_rgb(img)

    _ensure_bridge(store, manifest.bridge_id, manifest.images[0].geotag.point())
    store.defects.update(new_defects)
    store.defect_images.update(new_images)
    persist(store)
    return IngestReport(mode=IngestMode.DEFECT_RECORDS, defect_ids=sorted(new_defects))
