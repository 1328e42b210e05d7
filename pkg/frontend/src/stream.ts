/**
 * Outbound pose flow control.
 *
 * The service keeps one pending pose in its mailbox while solving another,
 * so the client allows at most two unacknowledged sends; anything newer
 * replaces the single pending slot (intermediate poses are discarded, which
 * is what makes slider scrubbing cheap). Sequence numbers are fresh and
 * strictly increasing; a reply with sequence s acknowledges every send <= s
 * because the server coalesces.
 */

import { encodePose } from "./protocol.js";
import { normalize } from "./quat.js";
import type { Quat, Vec3 } from "./quat.js";

type SendFn = (text: string) => void;

interface StashedPose {
  root: Vec3;
  rotations: Quat[];
}

export class PoseStreamer {
  private send: SendFn;
  private maxInflight: number;
  private nextSeq = 1;
  private unacked: number[] = [];
  private stash: StashedPose | null = null;

  constructor(send: SendFn, maxInflight = 2) {
    this.send = send;
    this.maxInflight = maxInflight;
  }

  /** Send the pose now if a slot is free, else remember it; returns the
   * sequence number used, or null when stashed. */
  submit(root: Vec3, rotations: Quat[]): number | null {
    if (this.unacked.length >= this.maxInflight) {
      this.stash = { root, rotations };
      return null;
    }
    return this.sendNow(root, rotations);
  }

  /** Handle any reply (solved frame or error) carrying a sequence number. */
  onReply(seq: number): void {
    this.unacked = this.unacked.filter((s) => s > seq);
    if (this.stash && this.unacked.length < this.maxInflight) {
      const { root, rotations } = this.stash;
      this.stash = null;
      this.sendNow(root, rotations);
    }
  }

  inflight(): number {
    return this.unacked.length;
  }

  hasPending(): boolean {
    return this.stash !== null;
  }

  private sendNow(root: Vec3, rotations: Quat[]): number {
    const seq = this.nextSeq++;
    this.unacked.push(seq);
    this.send(encodePose(seq, root, rotations.map((q) => normalize(q))));
    return seq;
  }
}
