import { describe, expect, it } from "vitest";
import {
  IDENTITY,
  fromAxisAngle,
  fromEulerDegrees,
  multiply,
  normalize,
  rotate,
  toMatrix,
} from "../src/quat.js";
import type { Quat, Vec3 } from "../src/quat.js";
import golden from "./fixtures/quat.json";

const closeTo = (a: number[], b: number[], tol: number) => {
  expect(a.length).toBe(b.length);
  for (let i = 0; i < a.length; i++) {
    expect(Math.abs(a[i] - b[i])).toBeLessThan(tol);
  }
};

describe("quaternion algebra", () => {
  it("matches the reference Hamilton product", () => {
    for (const c of golden.multiply) {
      closeTo(multiply(c.a as Quat, c.b as Quat), c.product, 1e-12);
    }
  });

  it("matches the reference sandwich rotation", () => {
    for (const c of golden.rotate) {
      closeTo(rotate(c.q as Quat, c.v as Vec3), c.rotated, 1e-12);
    }
  });

  it("matches the reference axis-angle construction", () => {
    for (const c of golden.axis_angle) {
      closeTo(fromAxisAngle(c.axis as Vec3, c.angle), c.quat, 1e-12);
    }
  });

  it("identity leaves vectors alone", () => {
    closeTo(rotate(IDENTITY, [1.5, -2, 0.25]), [1.5, -2, 0.25], 1e-15);
  });

  it("normalize returns unit quaternions and fixes degenerate input", () => {
    const q = normalize([2, 2, 2, 2]);
    closeTo(q, [0.5, 0.5, 0.5, 0.5], 1e-15);
    closeTo(normalize([0, 0, 0, 0]), [1, 0, 0, 0], 1e-15);
  });

  it("rotation matrices agree with sandwich products", () => {
    for (const c of golden.rotate.slice(0, 4)) {
      const m = toMatrix(c.q as Quat);
      const v = c.v as Vec3;
      const viaMatrix = [
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
      ];
      closeTo(viaMatrix, c.rotated, 1e-12);
    }
  });
});

describe("euler slider mapping", () => {
  it("single-axis angles reduce to axis-angle quaternions", () => {
    closeTo(fromEulerDegrees(90, 0, 0), fromAxisAngle([1, 0, 0], Math.PI / 2), 1e-12);
    closeTo(fromEulerDegrees(0, -45, 0), fromAxisAngle([0, 1, 0], -Math.PI / 4), 1e-12);
    closeTo(fromEulerDegrees(0, 0, 90), fromAxisAngle([0, 0, 1], Math.PI / 2), 1e-12);
  });

  it("composes as Rz * Ry * Rx", () => {
    const q = fromEulerDegrees(10, 20, 30);
    const manual = multiply(
      fromAxisAngle([0, 0, 1], (30 * Math.PI) / 180),
      multiply(
        fromAxisAngle([0, 1, 0], (20 * Math.PI) / 180),
        fromAxisAngle([1, 0, 0], (10 * Math.PI) / 180),
      ),
    );
    closeTo(q, manual, 1e-12);
  });
});
