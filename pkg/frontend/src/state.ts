/** Client-side scene state: buffers from /scene, current pose, frame stats. */

import type { SkeletonMirror } from "./fk.js";
import type { FramePayload } from "./protocol.js";
import { IDENTITY, normalize } from "./quat.js";
import type { Quat, Vec3 } from "./quat.js";

export interface JointInfo {
  name: string;
  parent: number | null;
  rest: Vec3;
}

export interface SceneInfo {
  name: string;
  num_vertices: number;
  num_tets: number;
  num_joints: number;
  num_bones: number;
  vertices: Vec3[];
  faces: [number, number, number][];
  joints: JointInfo[];
  bones: [number, number][];
  clustering: { strategy: string; cluster_sizes: number[] };
  pins: { count: number; stiffness: number };
  material: { model: string; mu: number; lam: number };
}

/** Validate the /scene JSON enough to fail loudly on a wrong endpoint. */
export function sceneFromJson(json: unknown): SceneInfo {
  if (typeof json !== "object" || json === null) {
    throw new Error("invalid scene payload: not an object");
  }
  const obj = json as Record<string, unknown>;
  for (const key of ["name", "num_vertices", "vertices", "faces", "joints", "bones"]) {
    if (!(key in obj)) {
      throw new Error(`invalid scene payload: missing '${key}'`);
    }
  }
  const info = json as SceneInfo;
  if (info.vertices.length !== info.num_vertices) {
    throw new Error(
      `invalid scene payload: ${info.vertices.length} vertices, advertised ${info.num_vertices}`);
  }
  if (info.joints.length !== info.num_joints) {
    throw new Error("invalid scene payload: joint list does not match num_joints");
  }
  return info;
}

/**
 * Signed volume enclosed by an outward-wound triangle surface
 * (divergence theorem, one tetrahedron against the origin per face).
 */
export function surfaceVolume(positions: ArrayLike<number>, indices: ArrayLike<number>): number {
  let six = 0;
  for (let f = 0; f < indices.length; f += 3) {
    const a = 3 * (indices[f] as number);
    const b = 3 * (indices[f + 1] as number);
    const c = 3 * (indices[f + 2] as number);
    const ax = positions[a], ay = positions[a + 1], az = positions[a + 2];
    const bx = positions[b], by = positions[b + 1], bz = positions[b + 2];
    const cx = positions[c], cy = positions[c + 1], cz = positions[c + 2];
    six += ax * (by * cz - bz * cy) + ay * (bz * cx - bx * cz) + az * (bx * cy - by * cx);
  }
  return six / 6;
}

export interface FrameStats {
  solveMs: number | null;
  volumePct: number | null;
}

export class ClientScene {
  readonly info: SceneInfo;
  readonly restPositions: Float32Array;
  readonly indices: Uint32Array;
  readonly skeleton: SkeletonMirror;
  readonly restVolume: number;

  rotations: Quat[];
  rootTranslation: Vec3;

  /** Displayed vertex buffer; swapped wholesale on each accepted frame. */
  positions: Float32Array;
  /** Highest acknowledged sequence number, -1 before the first frame. */
  lastSeq: number;
  stats: FrameStats;

  constructor(info: SceneInfo) {
    this.info = info;
    this.restPositions = new Float32Array(info.num_vertices * 3);
    for (let i = 0; i < info.vertices.length; i++) {
      this.restPositions.set(info.vertices[i], 3 * i);
    }
    this.indices = new Uint32Array(info.faces.length * 3);
    for (let i = 0; i < info.faces.length; i++) {
      this.indices.set(info.faces[i], 3 * i);
    }
    this.skeleton = {
      parents: info.joints.map((j) => j.parent),
      rests: info.joints.map((j) => j.rest),
      names: info.joints.map((j) => j.name),
    };
    this.restVolume = surfaceVolume(this.restPositions, this.indices);
    this.rotations = info.joints.map(() => [...IDENTITY] as Quat);
    this.rootTranslation = [0, 0, 0];
    this.positions = this.restPositions;
    this.lastSeq = -1;
    this.stats = { solveMs: null, volumePct: null };
  }

  setJointRotation(joint: number, q: Quat): void {
    this.rotations[joint] = q;
  }

  resetPose(): void {
    this.rotations = this.info.joints.map(() => [...IDENTITY] as Quat);
    this.rootTranslation = [0, 0, 0];
  }

  /** Renormalized copy of the current pose, safe to hand to the streamer. */
  poseSnapshot(): { root: Vec3; rotations: Quat[] } {
    return {
      root: [...this.rootTranslation] as Vec3,
      rotations: this.rotations.map((q) => normalize(q)),
    };
  }

  /**
   * Adopt a solved frame. Stale frames (sequence lower than the displayed
   * one) are discarded so the rendered sequence number never decreases.
   */
  acceptFrame(frame: FramePayload, roundTripMs: number): boolean {
    if (frame.count * 3 !== this.restPositions.length) {
      throw new Error(
        `frame vertex count ${frame.count} does not match scene ${this.info.num_vertices}`);
    }
    if (frame.seq < this.lastSeq) {
      return false;
    }
    this.positions = frame.positions;
    this.lastSeq = frame.seq;
    this.stats = {
      solveMs: roundTripMs,
      volumePct: 100 * (surfaceVolume(frame.positions, this.indices) / this.restVolume - 1),
    };
    return true;
  }
}
