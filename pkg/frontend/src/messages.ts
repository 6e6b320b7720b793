/** Outgoing control messages (client convention: left-handed, +Y up). */

import { CameraPose } from "./camera.js";
import { Quat, Vec3 } from "./math.js";

export function cameraPoseMessage(pose: CameraPose, fovYDeg: number | null = null): string {
  const doc: Record<string, unknown> = {
    type: "camera_pose",
    position: pose.position,
    rotation: pose.rotation,
    convention: "unity_lh_yup",
  };
  if (fovYDeg !== null) doc.fov_y_deg = fovYDeg;
  return JSON.stringify(doc);
}

export function objectPoseMessage(objectId: string, position: Vec3, rotation: Quat, scale: number): string {
  return JSON.stringify({
    type: "object_pose",
    object_id: objectId,
    position,
    rotation,
    scale,
    convention: "unity_lh_yup",
  });
}
