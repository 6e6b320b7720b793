/** Browser viewer: frame display, camera/object controls, telemetry charts. */

import { FlyCamera, OrbitCamera } from "./camera.js";
import { drawSeries } from "./charts.js";
import { axisAngle, quatMul, Quat, Vec3 } from "./math.js";
import { cameraPoseMessage, objectPoseMessage } from "./messages.js";
import { decodePacket, FramePacket, PacketError } from "./packet.js";
import { LatestWinsThrottle } from "./throttle.js";
import { applyTextMessage, frameLatencyMs, ViewerState } from "./state.js";

const MESSAGE_RATE = 60; // per type, messages per second

const el = {
  canvas: document.getElementById("frame") as HTMLCanvasElement,
  overlay: document.getElementById("overlay") as HTMLDivElement,
  banner: document.getElementById("banner") as HTMLDivElement,
  charts: document.getElementById("charts") as HTMLDivElement,
  objectSelect: document.getElementById("object-select") as HTMLSelectElement,
  resetButton: document.getElementById("object-reset") as HTMLButtonElement,
  depthToggle: document.getElementById("depth-toggle") as HTMLInputElement,
  sliders: {
    tx: document.getElementById("obj-tx") as HTMLInputElement,
    ty: document.getElementById("obj-ty") as HTMLInputElement,
    tz: document.getElementById("obj-tz") as HTMLInputElement,
    yaw: document.getElementById("obj-yaw") as HTMLInputElement,
    pitch: document.getElementById("obj-pitch") as HTMLInputElement,
    roll: document.getElementById("obj-roll") as HTMLInputElement,
    scale: document.getElementById("obj-scale") as HTMLInputElement,
  },
};

const state = new ViewerState();
const orbit = new OrbitCamera();
let fly: FlyCamera | null = null; // non-null while fly mode is active
let cameraDirty = true;

let ws: WebSocket | null = null;
let reconnectDelay = 500;

const scratch = document.createElement("canvas");
const scratchCtx = scratch.getContext("2d")!;
let latestFrame: FramePacket | null = null;
let pendingBitmap: ImageBitmap | null = null;
let framesDisplayed = 0;
let fpsWindowStart = performance.now();
let displayFps = 0;

const sendText = (text: string) => {
  if (ws && ws.readyState === WebSocket.OPEN) ws.send(text);
};
const cameraThrottle = new LatestWinsThrottle<string>(MESSAGE_RATE, sendText);
const objectThrottle = new LatestWinsThrottle<string>(MESSAGE_RATE, sendText);

function setBanner(text: string | null): void {
  el.banner.textContent = text ?? "";
  el.banner.style.display = text ? "block" : "none";
}

function connect(): void {
  const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  setBanner(`connecting to ${url}`);
  ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  ws.onopen = () => {
    reconnectDelay = 500;
    setBanner(null);
    cameraDirty = true;
  };
  ws.onmessage = (event) => {
    if (typeof event.data === "string") {
      applyTextMessage(state, event.data);
      if (state.banner) {
        setBanner(state.banner);
        state.banner = null;
      }
      syncObjectOptions();
      return;
    }
    try {
      handlePacket(decodePacket(event.data as ArrayBuffer));
    } catch (err) {
      if (err instanceof PacketError) {
        setBanner(`bad frame packet: ${err.message}`);
        return; // stream continues
      }
      throw err;
    }
  };
  ws.onclose = () => {
    state.status.state = "retrying";
    setBanner(`connection lost, retrying in ${(reconnectDelay / 1000).toFixed(1)}s`);
    setTimeout(connect, reconnectDelay);
    reconnectDelay = Math.min(reconnectDelay * 2, 5000);
  };
  ws.onerror = () => {
    ws?.close();
  };
}

function handlePacket(packet: FramePacket): void {
  latestFrame = packet;
  state.lastFrameIndex = packet.frameIndex;
  if (packet.encoding === "png") {
    const copy = packet.payload.slice();
    void createImageBitmap(new Blob([copy.buffer as ArrayBuffer], { type: "image/png" })).then((bitmap) => {
      pendingBitmap = bitmap;
    });
  }
}

function drawLatest(): void {
  const packet = latestFrame;
  if (!packet) return;
  const ctx = el.canvas.getContext("2d");
  if (!ctx) return;
  if (scratch.width !== packet.width || scratch.height !== packet.height) {
    scratch.width = packet.width;
    scratch.height = packet.height;
  }
  if (packet.encoding === "rgba8_raw") {
    const rgba = new Uint8ClampedArray(packet.payload); // copy; ImageData needs clamped
    scratchCtx.putImageData(new ImageData(rgba, packet.width, packet.height), 0, 0);
  } else if (pendingBitmap) {
    scratchCtx.drawImage(pendingBitmap, 0, 0);
  } else {
    return; // png still decoding
  }
  if (el.depthToggle.checked && packet.depthPreview) {
    const d = packet.depthPreview;
    const overlay = new Uint8ClampedArray(d.length * 4);
    for (let i = 0; i < d.length; i++) {
      overlay[i * 4] = overlay[i * 4 + 1] = overlay[i * 4 + 2] = d[i];
      overlay[i * 4 + 3] = 200;
    }
    scratchCtx.putImageData(new ImageData(overlay, packet.width, packet.height), 0, 0);
  }

  // letterbox into the display canvas
  const cw = el.canvas.width;
  const ch = el.canvas.height;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, cw, ch);
  const scale = Math.min(cw / packet.width, ch / packet.height);
  const dw = packet.width * scale;
  const dh = packet.height * scale;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(scratch, (cw - dw) / 2, (ch - dh) / 2, dw, dh);

  framesDisplayed += 1;
  const now = performance.now();
  if (now - fpsWindowStart >= 1000) {
    displayFps = (framesDisplayed * 1000) / (now - fpsWindowStart);
    framesDisplayed = 0;
    fpsWindowStart = now;
  }
  const latency = frameLatencyMs(state, packet.timestampNs, Date.now());
  el.overlay.textContent =
    `frame ${packet.frameIndex} | ${displayFps.toFixed(1)} fps | ` +
    `latency ${latency.toFixed(0)} ms | ${state.status.state}` +
    (fly ? " | FLY (f to exit)" : "");
}

// -- camera input ---------------------------------------------------------------

const heldKeys = new Set<string>();
let dragging = false;
let lastPointer: [number, number] = [0, 0];

el.canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  lastPointer = [e.clientX, e.clientY];
  el.canvas.setPointerCapture(e.pointerId);
});
el.canvas.addEventListener("pointerup", () => {
  dragging = false;
});
el.canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const dx = e.clientX - lastPointer[0];
  const dy = e.clientY - lastPointer[1];
  lastPointer = [e.clientX, e.clientY];
  if (fly) {
    fly.look(dx, dy);
  } else if (e.shiftKey || e.buttons === 4) {
    orbit.pan(dx, dy);
  } else {
    orbit.drag(dx, dy);
  }
  cameraDirty = true;
});
el.canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  if (!fly) {
    orbit.zoom(e.deltaY);
    cameraDirty = true;
  }
});
window.addEventListener("keydown", (e) => {
  const key = e.key.toLowerCase();
  if (key === "f") {
    fly = fly ? null : FlyCamera.fromPose(orbit.pose());
    cameraDirty = true;
    return;
  }
  heldKeys.add(key);
});
window.addEventListener("keyup", (e) => heldKeys.delete(e.key.toLowerCase()));

// -- object controls --------------------------------------------------------------

function syncObjectOptions(): void {
  const ids = state.status.objectIds;
  const existing = Array.from(el.objectSelect.options).map((o) => o.value);
  if (ids.length === existing.length && ids.every((v, i) => v === existing[i])) return;
  el.objectSelect.innerHTML = "";
  for (const id of ids) {
    const option = document.createElement("option");
    option.value = id;
    option.textContent = id;
    el.objectSelect.appendChild(option);
  }
  if (state.selectedObjectId) el.objectSelect.value = state.selectedObjectId;
}

function objectPoseFromSliders(): { position: Vec3; rotation: Quat; scale: number } {
  const v = (input: HTMLInputElement) => parseFloat(input.value);
  const rotation = quatMul(
    axisAngle([0, 1, 0], (v(el.sliders.yaw) * Math.PI) / 180),
    quatMul(
      axisAngle([1, 0, 0], (v(el.sliders.pitch) * Math.PI) / 180),
      axisAngle([0, 0, 1], (v(el.sliders.roll) * Math.PI) / 180),
    ),
  );
  return {
    position: [v(el.sliders.tx), v(el.sliders.ty), v(el.sliders.tz)],
    rotation,
    scale: Math.max(0.01, v(el.sliders.scale)),
  };
}

function emitObjectPose(): void {
  const id = el.objectSelect.value || state.selectedObjectId;
  if (!id) return;
  const { position, rotation, scale } = objectPoseFromSliders();
  objectThrottle.push(objectPoseMessage(id, position, rotation, scale));
}

for (const input of Object.values(el.sliders)) {
  input.addEventListener("input", emitObjectPose);
}
el.objectSelect.addEventListener("change", () => {
  state.selectedObjectId = el.objectSelect.value;
});
el.resetButton.addEventListener("click", () => {
  el.sliders.tx.value = el.sliders.ty.value = el.sliders.tz.value = "0";
  el.sliders.yaw.value = el.sliders.pitch.value = el.sliders.roll.value = "0";
  el.sliders.scale.value = "1";
  emitObjectPose();
});

// -- main loop ----------------------------------------------------------------------

let lastTick = performance.now();
let lastChartDraw = 0;

function tick(): void {
  const now = performance.now();
  const dt = Math.min(0.1, (now - lastTick) / 1000);
  lastTick = now;

  if (fly) {
    if (heldKeys.size > 0) cameraDirty = true;
    fly.step(heldKeys, dt);
  }
  if (cameraDirty) {
    cameraDirty = false;
    const pose = fly ? fly.pose() : orbit.pose();
    cameraThrottle.push(cameraPoseMessage(pose));
  }
  drawLatest();

  if (now - lastChartDraw > 100) {
    lastChartDraw = now;
    for (const [name, ring] of state.telemetry) {
      let canvas = document.getElementById(`chart-${name}`) as HTMLCanvasElement | null;
      if (!canvas) {
        canvas = document.createElement("canvas");
        canvas.id = `chart-${name}`;
        canvas.width = 300;
        canvas.height = 80;
        canvas.className = "chart";
        el.charts.appendChild(canvas);
      }
      drawSeries(canvas, ring, name);
    }
  }
  requestAnimationFrame(tick);
}

function fitCanvas(): void {
  el.canvas.width = el.canvas.clientWidth;
  el.canvas.height = el.canvas.clientHeight;
}

window.addEventListener("resize", fitCanvas);
fitCanvas();
connect();
requestAnimationFrame(tick);
