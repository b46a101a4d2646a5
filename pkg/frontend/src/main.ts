// Page wiring: camera, polling loop, overlay canvas, banner, slider, verdict
// buttons. All behavior lives in the tested modules; this file only binds
// them to the DOM.

import { ServiceClient } from "./api.js";
import { grabFrame, openCamera } from "./capture.js";
import { bannerLabel, Language } from "./i18n.js";
import { drawOverlay, viewportScale } from "./overlay.js";
import { SightingQueue } from "./queue.js";
import { FieldSession } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start() {
  const params = new URLSearchParams(location.search);
  const serviceUrl = params.get("service") ?? "http://127.0.0.1:8080";

  const video = el<HTMLVideoElement>("camera");
  const overlayCanvas = el<HTMLCanvasElement>("overlay");
  const captureCanvas = document.createElement("canvas");
  const bannerNode = el<HTMLDivElement>("banner");
  const slider = el<HTMLInputElement>("threshold");
  const sliderValue = el<HTMLSpanElement>("threshold-value");
  const note = el<HTMLInputElement>("note");
  const queueBadge = el<HTMLSpanElement>("queue-size");
  const langToggle = el<HTMLButtonElement>("lang");

  let lang: Language = "es";
  const session = new FieldSession(
    new ServiceClient(serviceUrl),
    new SightingQueue(localStorage),
    { captureIntervalMs: Number(params.get("interval") ?? 500) },
  );

  function render(frameWidth: number, frameHeight: number) {
    const ctx = overlayCanvas.getContext("2d");
    if (ctx) {
      overlayCanvas.width = video.clientWidth;
      overlayCanvas.height = video.clientHeight;
      const scale = viewportScale(
        { width: frameWidth, height: frameHeight },
        { width: overlayCanvas.width, height: overlayCanvas.height },
      );
      drawOverlay(ctx, session.overlay, scale);
    }
    bannerNode.textContent = bannerLabel(session.banner, lang);
    bannerNode.dataset.state = session.banner;
    queueBadge.textContent = String(session.pendingSightings());
  }

  slider.addEventListener("input", () => {
    session.setThreshold(Number(slider.value));
    sliderValue.textContent = slider.value;
    render(captureCanvas.width || 640, captureCanvas.height || 480);
  });

  el<HTMLButtonElement>("confirm").addEventListener("click", () => {
    session.logSighting("confirmed", note.value).catch(() => undefined);
  });
  el<HTMLButtonElement>("reject").addEventListener("click", () => {
    session.logSighting("rejected", note.value).catch(() => undefined);
  });
  langToggle.addEventListener("click", () => {
    lang = lang === "es" ? "en" : "es";
    langToggle.textContent = lang.toUpperCase();
    render(captureCanvas.width || 640, captureCanvas.height || 480);
  });
  window.addEventListener("online", () => {
    session.flushQueue().catch(() => undefined);
  });

  try {
    await openCamera(video);
  } catch (err) {
    bannerNode.textContent = err instanceof Error ? err.message : String(err);
    bannerNode.dataset.state = "offline";
    return;
  }

  const loop = async () => {
    try {
      const frame = await grabFrame(video, captureCanvas);
      await session.tick(frame);
      render(frame.width, frame.height);
    } catch {
      // frame grab hiccups (tab hidden etc.) simply skip a cycle
    }
    setTimeout(loop, session.state.captureIntervalMs);
  };
  loop();
}

start();
