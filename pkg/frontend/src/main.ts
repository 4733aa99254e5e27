// Wiring: fetch -> state -> canvas, with popup/panel DOM and pan/zoom.

import { ApiClient } from "./api.js";
import { GeoBBox, planeProjection, Viewport, viewportBBox } from "./geo.js";
import { MapView } from "./mapview.js";
import { bridgePopupModel, defectDetailModel } from "./model.js";
import { markersVisible, needsRefetch, RequestSequencer } from "./state.js";
import { BridgeRecord, DefectRecord } from "./types.js";

const api = new ApiClient();
const canvas = document.getElementById("map") as HTMLCanvasElement;
const banner = document.getElementById("banner")!;
const popup = document.getElementById("popup")!;
const panel = document.getElementById("panel")!;

let bridges: BridgeRecord[] = [];
let defects: DefectRecord[] = [];
let defectCache: GeoBBox | null = null;
const defectRequests = new RequestSequencer();

function showBanner(text: string) {
  banner.textContent = text;
  banner.classList.remove("hidden");
}

function hideBanner() {
  banner.classList.add("hidden");
}

async function start() {
  try {
    bridges = await api.bridges();
    hideBanner();
  } catch {
    showBanner("service unreachable");
    bridges = [];
  }
  const center =
    bridges.length > 0
      ? {
          lat: bridges.reduce((s, b) => s + b.lat, 0) / bridges.length,
          lon: bridges.reduce((s, b) => s + b.lon, 0) / bridges.length,
        }
      : { lat: 40.8, lon: -96.7 };
  const proj = planeProjection(center);
  const mapView = new MapView(canvas, proj);
  const view: Viewport = { center, spanM: 30000 };

  async function updateMarkers() {
    if (!markersVisible(view.spanM)) {
      render();
      return;
    }
    const aspect = canvas.width / canvas.height;
    const needed = viewportBBox(proj, view, aspect);
    if (!needsRefetch(defectCache, needed)) {
      render();
      return;
    }
    const padded = viewportBBox(proj, view, aspect, 1.0);
    const token = defectRequests.next();
    try {
      const result = await api.defects(padded);
      if (!defectRequests.isCurrent(token)) return; // stale response: discard
      defects = result;
      defectCache = padded;
      hideBanner();
    } catch {
      showBanner("defect fetch failed");
    }
    render();
  }

  function render() {
    mapView.render(view, bridges, defects, markersVisible(view.spanM));
  }

  async function openBridgePopup(bridgeId: string) {
    try {
      const detail = await api.bridge(bridgeId);
      const model = bridgePopupModel(detail, api);
      const maps = model.maps
        .map(
          (m) =>
            `<figure><img src="${m.imageUrl}" alt="${m.label}"><figcaption>${m.label}</figcaption></figure>`,
        )
        .join("");
      popup.innerHTML =
        `<button class="close">&times;</button>` +
        `<h2><span class="flag" style="background:${model.color}"></span>${model.title}</h2>` +
        `<p>condition: ${model.condition}</p>` +
        (maps ? `<div class="maps">${maps}</div>` : "<p>no surface maps</p>");
      popup.classList.remove("hidden");
      popup.querySelector(".close")!.addEventListener("click", () => {
        popup.classList.add("hidden");
      });
    } catch {
      popup.innerHTML = `<button class="close">&times;</button><p>bridge not found</p>`;
      popup.classList.remove("hidden");
      popup.querySelector(".close")!.addEventListener("click", () => {
        popup.classList.add("hidden");
      });
    }
  }

  function openDefectPanel(defect: DefectRecord) {
    const model = defectDetailModel(defect, api);
    panel.innerHTML =
      `<button class="close">&times;</button>` +
      `<h2>${model.title}</h2>` +
      `<p>sensor: ${model.sensor}</p>` +
      `<p>${model.note}</p>` +
      (model.imageUrl ? `<img src="${model.imageUrl}" alt="defect close-up">` : "");
    panel.classList.remove("hidden");
    panel.querySelector(".close")!.addEventListener("click", () => {
      panel.classList.add("hidden");
    });
  }

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    const bridge = mapView.hitBridge(view, bridges, x, y);
    if (bridge !== null) {
      void openBridgePopup(bridge.bridge_id);
      return;
    }
    if (markersVisible(view.spanM)) {
      const defect = mapView.hitDefect(view, defects, x, y);
      if (defect !== null) openDefectPanel(defect);
    }
  });

  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY > 0 ? 1.25 : 0.8;
    view.spanM = Math.min(200000, Math.max(20, view.spanM * factor));
    void updateMarkers();
  });

  let dragging: { x: number; y: number } | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    dragging = { x: ev.clientX, y: ev.clientY };
  });
  window.addEventListener("mouseup", () => {
    dragging = null;
  });
  window.addEventListener("mousemove", (ev) => {
    if (dragging === null) return;
    const scale = view.spanM / canvas.width; // meters per px
    const c = proj.toPlane(view.center);
    view.center = proj.toGeo(
      c.east - (ev.clientX - dragging.x) * scale,
      c.north + (ev.clientY - dragging.y) * scale,
    );
    dragging = { x: ev.clientX, y: ev.clientY };
    void updateMarkers();
  });

  render();
  void updateMarkers();
}

void start();
