/**
 * Collection page wiring: loads config + the shared PIN list, renders the
 * numpad, and streams sensor/key data while the participant enters PINs.
 */

import { CaptureSession, fetchTransport } from "./capture.js";
import { attachSensorListeners, requestSensorPermission, sensorsSupported } from "./sensors.js";

interface CollectorConfig {
  server_url: string;
  pin_list_url: string;
  reps: number;
}

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function setStatus(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "status error" : "status";
}

function render(session: CaptureSession): void {
  const target = session.currentTarget;
  $("target").textContent = target ?? "done";
  $("entered").textContent = "*".repeat(session.digitsEntered).padEnd(4, "_");
  $("progress").textContent = `${session.targetsRemaining} entries left`;
  if (session.phase === "error") {
    setStatus(`capture stopped: ${session.lastError}`, true);
  } else if (session.phase === "finished") {
    setStatus("all PINs captured - thank you!");
  }
}

async function begin(): Promise<void> {
  if (!sensorsSupported()) {
    setStatus("this device does not expose motion/orientation events; " +
      "please use a mobile browser", true);
    return;
  }
  if (!(await requestSensorPermission())) {
    setStatus("sensor permission was denied", true);
    return;
  }
  const user = ($("user") as HTMLInputElement).value.trim();
  if (!user) {
    setStatus("enter a participant id first", true);
    return;
  }

  const config: CollectorConfig = await (await fetch("./config.json")).json();
  const pins: string[] = await (await fetch(config.pin_list_url)).json();

  const session = await CaptureSession.start({
    user,
    device: navigator.userAgent,
    pins,
    reps: config.reps,
    transport: fetchTransport(config.server_url),
    onStateChange: render,
  });

  const detach = attachSensorListeners(session);
  $("setup").hidden = true;
  $("pad").hidden = false;
  setStatus(`session ${session.sessionId} recording`);
  render(session);

  document.querySelectorAll<HTMLButtonElement>("button[data-digit]").forEach((btn) => {
    btn.addEventListener("click", () => {
      session.onKeypress(Number(btn.dataset.digit));
      render(session);
      if (session.phase !== "running") detach();
    });
  });
}

document.addEventListener("DOMContentLoaded", () => {
  $("start").addEventListener("click", () => {
    begin().catch((err) => setStatus(`could not start: ${err}`, true));
  });
});
