/**
 * Camera models emitting poses in the client convention (left-handed, +Y up,
 * +Z forward). Orbit is the default; fly mode is toggled by key.
 */

import { Quat, Vec3, add, axisAngle, clamp, cross, normalize, quatFromBasis, quatMul, quatRotate, scale, sub } from "./math.js";

export interface CameraPose {
  position: Vec3;
  rotation: Quat;
}

export const PITCH_LIMIT = (89 * Math.PI) / 180;
const WORLD_UP: Vec3 = [0, 1, 0];

export interface OrbitParams {
  target: Vec3;
  distance: number;
  yaw: number; // radians around +Y, 0 looks along +Z
  pitch: number; // radians, positive looks down; clamped to (-89deg, 89deg)
}

export function orbitForward(yaw: number, pitch: number): Vec3 {
  return [Math.cos(pitch) * Math.sin(yaw), -Math.sin(pitch), Math.cos(pitch) * Math.cos(yaw)];
}

/** Orbit parameters -> camera pose looking at the target. */
export function orbitToPose(o: OrbitParams): CameraPose {
  const forward = orbitForward(o.yaw, o.pitch);
  const position = sub(o.target, scale(forward, o.distance));
  const right = normalize(cross(WORLD_UP, forward));
  const up = cross(forward, right);
  return { position, rotation: quatFromBasis(right, up, forward) };
}

/** Inverse of orbitToPose given the orbit distance (a pose alone has no range). */
export function poseToOrbit(pose: CameraPose, distance: number): OrbitParams {
  const forward = quatRotate(pose.rotation, [0, 0, 1]);
  const target = add(pose.position, scale(forward, distance));
  const pitch = Math.asin(clamp(-forward[1], -1, 1));
  const yaw = Math.atan2(forward[0], forward[2]);
  return { target, distance, yaw, pitch };
}

export class OrbitCamera {
  target: Vec3 = [0, 0, 3];
  distance = 3;
  yaw = 0;
  pitch = 0;
  rotateSensitivity = 0.008; // radians per pixel
  panSensitivity = 0.002;

  drag(dx: number, dy: number): void {
    this.yaw += dx * this.rotateSensitivity;
    this.pitch = clamp(this.pitch + dy * this.rotateSensitivity, -PITCH_LIMIT, PITCH_LIMIT);
  }

  pan(dx: number, dy: number): void {
    const pose = this.pose();
    const right = quatRotate(pose.rotation, [1, 0, 0]);
    const up = quatRotate(pose.rotation, [0, 1, 0]);
    const k = this.panSensitivity * this.distance;
    this.target = add(this.target, add(scale(right, -dx * k), scale(up, dy * k)));
  }

  /** Wheel zoom: exponential in scroll delta, distance stays positive. */
  zoom(deltaY: number): void {
    this.distance = clamp(this.distance * Math.exp(deltaY * 0.001), 0.05, 1e4);
  }

  pose(): CameraPose {
    return orbitToPose({ target: this.target, distance: this.distance, yaw: this.yaw, pitch: this.pitch });
  }
}

export class FlyCamera {
  position: Vec3 = [0, 0, 0];
  yaw = 0;
  pitch = 0;
  speed = 2.0; // units per second
  lookSensitivity = 0.008;

  static fromPose(pose: CameraPose): FlyCamera {
    const cam = new FlyCamera();
    cam.position = [...pose.position] as Vec3;
    const forward = quatRotate(pose.rotation, [0, 0, 1]);
    cam.pitch = Math.asin(clamp(-forward[1], -1, 1));
    cam.yaw = Math.atan2(forward[0], forward[2]);
    return cam;
  }

  look(dx: number, dy: number): void {
    this.yaw += dx * this.lookSensitivity;
    this.pitch = clamp(this.pitch + dy * this.lookSensitivity, -PITCH_LIMIT, PITCH_LIMIT);
  }

  /** keys: set of currently held keys among w/a/s/d/q/e; dt in seconds. */
  step(keys: Set<string>, dt: number): void {
    const pose = this.pose();
    const forward = quatRotate(pose.rotation, [0, 0, 1]);
    const right = quatRotate(pose.rotation, [1, 0, 0]);
    let move: Vec3 = [0, 0, 0];
    if (keys.has("w")) move = add(move, forward);
    if (keys.has("s")) move = sub(move, forward);
    if (keys.has("d")) move = add(move, right);
    if (keys.has("a")) move = sub(move, right);
    if (keys.has("e")) move = add(move, WORLD_UP);
    if (keys.has("q")) move = sub(move, WORLD_UP);
    this.position = add(this.position, scale(move, this.speed * dt));
  }

  pose(): CameraPose {
    const forward = orbitForward(this.yaw, this.pitch);
    const right = normalize(cross(WORLD_UP, forward));
    const up = cross(forward, right);
    return { position: this.position, rotation: quatFromBasis(right, up, forward) };
  }
}

/** Relative rotation carrying pose a's view direction onto pose b's. */
export function relativeRotation(a: CameraPose, b: CameraPose): Quat {
  return quatMul(b.rotation, [-a.rotation[0], -a.rotation[1], -a.rotation[2], a.rotation[3]]);
}

export function yawQuat(angle: number): Quat {
  return axisAngle([0, 1, 0], angle);
}
