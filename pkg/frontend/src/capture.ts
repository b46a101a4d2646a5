// Camera plumbing: request the stream, grab frames as PNG blobs.

export async function openCamera(video: HTMLVideoElement): Promise<void> {
  if (!navigator.mediaDevices?.getUserMedia) {
    throw new Error("camera not supported in this browser");
  }
  try {
    const stream = await navigator.mediaDevices.getUserMedia({
      video: { facingMode: "environment" },
      audio: false,
    });
    video.srcObject = stream;
    await video.play();
  } catch (err) {
    throw new Error(
      "camera permission denied: allow camera access in the browser settings " +
        `and reload (${err instanceof Error ? err.message : err})`,
    );
  }
}

let frameCounter = 0;

export async function grabFrame(
  video: HTMLVideoElement,
  canvas: HTMLCanvasElement,
): Promise<{ data: Blob; ref: string; width: number; height: number }> {
  const width = video.videoWidth || 640;
  const height = video.videoHeight || 480;
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas not available");
  ctx.drawImage(video, 0, 0, width, height);
  const data = await new Promise<Blob>((resolve, reject) => {
    canvas.toBlob(
      (blob) => (blob ? resolve(blob) : reject(new Error("frame encode failed"))),
      "image/png",
    );
  });
  frameCounter += 1;
  return { data, ref: `frame-${Date.now()}-${frameCounter}`, width, height };
}
