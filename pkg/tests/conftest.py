import math

import numpy as np
import pytest

from deckfuse import catalog, synth
from deckfuse.catalog import BridgeRecord, DefectRecord, Store, SurfaceMapMeta, add_bridge, add_defect
from deckfuse.geodesy import GeoPoint
from deckfuse.projection import CameraRig
from deckfuse.raster import Raster

# reference rig used throughout the examples: l=d=0, gamma=0, h=10,
# theta=pi/4, alpha=pi/4, 101x101
REFERENCE_RIG = CameraRig(
    l=0.0, d=0.0, h=10.0, theta=math.pi / 4, gamma=0.0, alpha=math.pi / 4, m=101, n=101
)


def checker_raster(squares: int, square_px: int, low: int = 0, high: int = 255) -> Raster:
    """Checkerboard test image; corners sit on half-integer pixel boundaries."""
    n = squares * square_px
    idx = np.arange(n) // square_px
    parity = (idx[:, None] + idx[None, :]) % 2
    img = np.where(parity == 0, low, high).astype(np.uint8)
    return Raster.from_array(img)


def textured_raster(w: int, h: int, seed: int) -> Raster:
    """Smooth random texture with trackable structure."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    f = gaussian_filter(rng.normal(0.0, 1.0, size=(h, w)), 2.0)
    f = 128 + f * (70.0 / max(1e-9, f.std()))
    return Raster.from_array(np.clip(np.rint(f), 0, 255).astype(np.uint8))


def build_five_bridge_store(root) -> Store:
    """The seeded fixture: five bridges, one Poor/red, maps and defects."""
    store = catalog.open_store(root)
    locations = [
        ("br-001", "I-80 over Salt Creek", 40.8200, -96.7100, "Good"),
        ("br-002", "US-77 overpass", 40.8010, -96.7005, "Fair"),
        ("br-003", "N 27th St bridge", 40.8150, -96.6800, "Poor"),
        ("br-004", "Rokeby Rd crossing", 40.7400, -96.6550, "Good"),
        ("br-005", "Superior St bridge", 40.8550, -96.6900, "Fair"),
    ]
    for bridge_id, name, lat, lon, condition in locations:
        add_bridge(
            store,
            BridgeRecord(
                bridge_id=bridge_id,
                name=name,
                location=GeoPoint(lat, lon),
                condition=condition,
            ),
            save=False,
        )

    # three small surface maps on the Poor bridge (two phase-1, one phase-2)
    rng = np.random.default_rng(5)
    for k, (phase, sensor) in enumerate(
        ((1, "optical"), (1, "infrared"), (2, "hammer_sounding"))
    ):
        map_id = f"br-003-map-{k+1}"
        px = rng.integers(0, 256, size=(40, 60, 3), dtype=np.uint8)
        mask = np.ones((40, 60), dtype=bool)
        mask[:5, :5] = False
        mosaic = Raster.from_array(px, mask)
        meta = SurfaceMapMeta(
            map_id=map_id,
            bridge_id="br-003",
            phase=phase,
            sensor=sensor,
            anchor=GeoPoint(40.8151, -96.6801),
            anchor_pixel=(20.0, 30.0),
            gsd=0.05,
            rows=40,
            cols=60,
        )
        store.maps[map_id] = (meta, mosaic)
        bridge = store.bridges["br-003"]
        store.bridges["br-003"] = BridgeRecord(
            bridge_id=bridge.bridge_id,
            name=bridge.name,
            location=bridge.location,
            condition=bridge.condition,
            surface_map_ids=bridge.surface_map_ids + (map_id,),
        )

    closeup = Raster.from_array(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
    add_defect(
        store,
        DefectRecord(
            defect_id="br-003-defect-0001",
            bridge_id="br-003",
            position=GeoPoint(40.81505, -96.68005),
            defect_type="delamination",
            sensor="hammer_sounding",
            note="hollow response near centerline",
        ),
        image=closeup,
        save=False,
    )
    add_defect(
        store,
        DefectRecord(
            defect_id="br-003-defect-0002",
            bridge_id="br-003",
            position=GeoPoint(40.81512, -96.67990),
            defect_type="crack",
            sensor="optical",
            note="transverse crack, 1.2 m",
        ),
        save=False,
    )
    catalog.persist(store)
    return store


@pytest.fixture
def five_bridge_store(tmp_path):
    return build_five_bridge_store(tmp_path / "store")


def make_acceptance_flight(gps_noise_sigma=0.0, scene_seed=23, flight_seed=3, n_defects=10):
    """The frozen mosaic-accuracy dataset: 8 views, 60% overlap, 45-degree pitch."""
    scene = synth.make_deck_scene(60.0, 14.0, 25.0, n_defects, seed=scene_seed)
    rig = CameraRig(
        l=0.0, d=0.0, h=10.0, theta=math.radians(45), gamma=0.0, alpha=math.radians(20), m=791, n=301
    )
    plan, shots = synth.make_flight(scene, rig, 0.6, gps_noise_sigma, seed=flight_seed, n_views=8)
    return scene, rig, plan, shots
