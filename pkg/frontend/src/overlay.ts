// Box overlay: scale service-space boxes to the rendered viewport and draw.

import type { Detection } from "./types.js";

export type Scale = { x: number; y: number };

export function viewportScale(
  frame: { width: number; height: number },
  viewport: { width: number; height: number },
): Scale {
  return { x: viewport.width / frame.width, y: viewport.height / frame.height };
}

export function scaleBox(det: Detection, scale: Scale): Detection {
  return {
    ...det,
    x: det.x * scale.x,
    y: det.y * scale.y,
    w: det.w * scale.x,
    h: det.h * scale.y,
  };
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  detections: Detection[],
  scale: Scale,
  color = "#e74c3c",
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.lineWidth = 2;
  ctx.font = "13px sans-serif";
  for (const det of detections) {
    const box = scaleBox(det, scale);
    ctx.strokeStyle = color;
    ctx.strokeRect(box.x, box.y, box.w, box.h);
    const label = `${det.label} ${(det.score * 100).toFixed(1)}%`;
    const width = ctx.measureText(label).width + 8;
    ctx.fillStyle = "rgba(0,0,0,0.6)";
    ctx.fillRect(box.x, box.y - 17, width, 17);
    ctx.fillStyle = "#fff";
    ctx.fillText(label, box.x + 4, box.y - 4);
  }
}
