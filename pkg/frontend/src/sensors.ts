/**
 * Browser listener wiring: DeviceMotionEvent + DeviceOrientationEvent.
 *
 * Values are recorded verbatim (browsers disagree on units and sign
 * conventions, so normalization is deferred to analysis; the user-agent
 * string travels in the session's device label for that purpose).
 */

import { CaptureSession } from "./capture.js";
import { Triple } from "./schema.js";

export function sensorsSupported(): boolean {
  return typeof window !== "undefined" &&
    "DeviceMotionEvent" in window &&
    "DeviceOrientationEvent" in window;
}

/** iOS 13+ gates the streams behind a user-gesture permission prompt. */
export async function requestSensorPermission(): Promise<boolean> {
  const anyMotion = DeviceMotionEvent as unknown as {
    requestPermission?: () => Promise<"granted" | "denied">;
  };
  if (typeof anyMotion.requestPermission === "function") {
    try {
      return (await anyMotion.requestPermission()) === "granted";
    } catch {
      return false;
    }
  }
  return true;
}

function triple(src: { x?: number | null; y?: number | null; z?: number | null } | null):
    Triple | null {
  if (!src || src.x == null || src.y == null || src.z == null) return null;
  return [src.x, src.y, src.z];
}

function orientationTriple(e: DeviceOrientationEvent): Triple | null {
  if (e.alpha == null || e.beta == null || e.gamma == null) return null;
  return [e.alpha, e.beta, e.gamma];
}

/** Register both listeners; returns an unsubscribe function. */
export function attachSensorListeners(session: CaptureSession): () => void {
  const onMotion = (e: DeviceMotionEvent) => {
    const rotR: Triple | null = e.rotationRate
      ? (e.rotationRate.alpha == null || e.rotationRate.beta == null ||
         e.rotationRate.gamma == null
          ? null
          : [e.rotationRate.alpha, e.rotationRate.beta, e.rotationRate.gamma])
      : null;
    const reading = {
      acc: triple(e.acceleration),
      accG: triple(e.accelerationIncludingGravity),
      rotR,
      ori: null,
      interval: e.interval && e.interval > 0 ? e.interval : null,
    };
    if (reading.acc || reading.accG || reading.rotR) session.onSensorReading(reading);
  };
  const onOrientation = (e: DeviceOrientationEvent) => {
    const ori = orientationTriple(e);
    if (ori) session.onSensorReading({ ori });
  };
  window.addEventListener("devicemotion", onMotion);
  window.addEventListener("deviceorientation", onOrientation);
  return () => {
    window.removeEventListener("devicemotion", onMotion);
    window.removeEventListener("deviceorientation", onOrientation);
  };
}
