/**
 * Forward kinematics mirror for the skeleton overlay.
 *
 * Joint rotations compose root to leaf about each joint's own rest position;
 * the root additionally carries the global translation. This only drives the
 * handle/bone overlay — mesh positions always come from the server verbatim.
 */

import { IDENTITY, multiply, rotate } from "./quat.js";
import type { Quat, Vec3 } from "./quat.js";

export interface SkeletonMirror {
  parents: (number | null)[];
  rests: Vec3[];
  names: string[];
}

export interface WorldPose {
  positions: Vec3[];
  rotations: Quat[];
}

export function worldJoints(
  skeleton: SkeletonMirror,
  rotations: Quat[],
  rootTranslation: Vec3,
): WorldPose {
  const n = skeleton.parents.length;
  if (rotations.length !== n) {
    throw new Error(`expected ${n} joint rotations, got ${rotations.length}`);
  }
  const worldRot: Quat[] = new Array(n);
  const worldPos: Vec3[] = new Array(n);
  for (let j = 0; j < n; j++) {
    const parent = skeleton.parents[j];
    const local = rotations[j] ?? IDENTITY;
    const rest = skeleton.rests[j];
    if (parent === null) {
      worldRot[j] = local;
      worldPos[j] = [
        rest[0] + rootTranslation[0],
        rest[1] + rootTranslation[1],
        rest[2] + rootTranslation[2],
      ];
    } else {
      worldRot[j] = multiply(worldRot[parent], local);
      const restParent = skeleton.rests[parent];
      const arm = rotate(worldRot[parent], [
        rest[0] - restParent[0],
        rest[1] - restParent[1],
        rest[2] - restParent[2],
      ]);
      const base = worldPos[parent];
      worldPos[j] = [base[0] + arm[0], base[1] + arm[1], base[2] + arm[2]];
    }
  }
  return { positions: worldPos, rotations: worldRot };
}
