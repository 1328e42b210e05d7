/** Minimal quaternion helpers, (w, x, y, z) order to match the service. */

export type Quat = [number, number, number, number];
export type Vec3 = [number, number, number];

export const IDENTITY: Quat = [1, 0, 0, 0];

export function multiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

/** Rotate v by a unit quaternion (sandwich product, expanded form). */
export function rotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const tx = 2 * (y * v[2] - z * v[1]);
  const ty = 2 * (z * v[0] - x * v[2]);
  const tz = 2 * (x * v[1] - y * v[0]);
  return [
    v[0] + w * tx + (y * tz - z * ty),
    v[1] + w * ty + (z * tx - x * tz),
    v[2] + w * tz + (x * ty - y * tx),
  ];
}

export function fromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  if (n === 0) return [...IDENTITY];
  const s = Math.sin(angle / 2) / n;
  return [Math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function normalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) return [...IDENTITY];
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** Row-major 3x3 rotation matrix. */
export function toMatrix(q: Quat): number[] {
  const c0 = rotate(q, [1, 0, 0]);
  const c1 = rotate(q, [0, 1, 0]);
  const c2 = rotate(q, [0, 0, 1]);
  return [c0[0], c1[0], c2[0], c0[1], c1[1], c2[1], c0[2], c1[2], c2[2]];
}

/** Slider angles in degrees, composed as Rz * Ry * Rx. */
export function fromEulerDegrees(xDeg: number, yDeg: number, zDeg: number): Quat {
  const rad = Math.PI / 180;
  const qx = fromAxisAngle([1, 0, 0], xDeg * rad);
  const qy = fromAxisAngle([0, 1, 0], yDeg * rad);
  const qz = fromAxisAngle([0, 0, 1], zDeg * rad);
  return multiply(qz, multiply(qy, qx));
}
