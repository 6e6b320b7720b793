import { describe, expect, it } from "vitest";

import { FlyCamera, OrbitCamera, orbitToPose, PITCH_LIMIT, poseToOrbit } from "../src/camera.js";
import { norm, quatMul, quatConj, quatRotate, sub, Vec3 } from "../src/math.js";

describe("orbit camera model", () => {
  it("round-trips orbit -> pose -> orbit within 1e-6", () => {
    let seed = 42;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    for (let i = 0; i < 200; i++) {
      const params = {
        target: [rand() * 4 - 2, rand() * 4 - 2, rand() * 4 - 2] as Vec3,
        distance: 0.2 + rand() * 10,
        yaw: (rand() * 2 - 1) * Math.PI,
        pitch: (rand() * 2 - 1) * 1.4,
      };
      const pose = orbitToPose(params);
      const back = poseToOrbit(pose, params.distance);
      expect(Math.abs(back.yaw - params.yaw)).toBeLessThan(1e-6);
      expect(Math.abs(back.pitch - params.pitch)).toBeLessThan(1e-6);
      expect(norm(sub(back.target, params.target))).toBeLessThan(1e-6);
    }
  });

  it("looks at the target", () => {
    const pose = orbitToPose({ target: [1, 2, 3], distance: 2, yaw: 0.7, pitch: -0.3 });
    const forward = quatRotate(pose.rotation, [0, 0, 1]);
    const toTarget = sub([1, 2, 3], pose.position);
    expect(norm(sub(forward, [toTarget[0] / 2, toTarget[1] / 2, toTarget[2] / 2]))).toBeLessThan(1e-9);
  });

  it("a 180-degree yaw drag rotates the view direction 180 degrees about up", () => {
    const cam = new OrbitCamera();
    const before = cam.pose();
    cam.drag(Math.PI / cam.rotateSensitivity, 0); // exactly pi of yaw
    const after = cam.pose();
    // relative rotation should be pi about +Y within 1e-3
    const rel = quatMul(after.rotation, quatConj(before.rotation));
    const angle = 2 * Math.acos(Math.min(1, Math.abs(rel[3])));
    expect(Math.abs(angle - Math.PI)).toBeLessThan(1e-3);
    const axis: Vec3 = [rel[0], rel[1], rel[2]];
    const axisNorm = norm(axis);
    expect(Math.abs(Math.abs(axis[1] / axisNorm) - 1)).toBeLessThan(1e-3);
    // and the forward vector flips horizontally
    const f0 = quatRotate(before.rotation, [0, 0, 1]);
    const f1 = quatRotate(after.rotation, [0, 0, 1]);
    expect(Math.abs(f0[0] + f1[0])).toBeLessThan(1e-3);
    expect(Math.abs(f0[2] + f1[2])).toBeLessThan(1e-3);
  });

  it("clamps pitch to under 89 degrees", () => {
    const cam = new OrbitCamera();
    cam.drag(0, 1e9);
    expect(cam.pitch).toBeLessThanOrEqual(PITCH_LIMIT);
    cam.drag(0, -1e9);
    expect(cam.pitch).toBeGreaterThanOrEqual(-PITCH_LIMIT);
  });

  it("zooms exponentially and keeps distance positive", () => {
    const cam = new OrbitCamera();
    const d0 = cam.distance;
    cam.zoom(1000);
    const d1 = cam.distance;
    cam.zoom(1000);
    expect(d1 / d0).toBeCloseTo(cam.distance / d1, 6); // equal ratios
    cam.zoom(-1e9);
    expect(cam.distance).toBeGreaterThan(0);
  });
});

describe("fly camera", () => {
  it("moves along the view direction on W", () => {
    const fly = new FlyCamera();
    fly.yaw = 0.5;
    fly.pitch = -0.2;
    const forward = quatRotate(fly.pose().rotation, [0, 0, 1]);
    fly.step(new Set(["w"]), 0.5);
    const moved = fly.position;
    const expected: Vec3 = [forward[0], forward[1], forward[2]].map((v) => v * fly.speed * 0.5) as Vec3;
    expect(norm(sub(moved, expected))).toBeLessThan(1e-9);
  });

  it("adopts the orbit pose when toggled", () => {
    const orbit = new OrbitCamera();
    orbit.drag(120, -60);
    const fly = FlyCamera.fromPose(orbit.pose());
    const a = orbit.pose();
    const b = fly.pose();
    expect(norm(sub(a.position, b.position))).toBeLessThan(1e-9);
    const dot =
      a.rotation[0] * b.rotation[0] +
      a.rotation[1] * b.rotation[1] +
      a.rotation[2] * b.rotation[2] +
      a.rotation[3] * b.rotation[3];
    expect(Math.abs(Math.abs(dot) - 1)).toBeLessThan(1e-9);
  });
});
