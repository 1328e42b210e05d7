/**
 * Entry point: fetch the scene, wire the websocket, render, stream poses.
 */

import { worldJoints } from "./fk.js";
import { Panel, errorBanner } from "./panel.js";
import { decodeError, decodeFrame } from "./protocol.js";
import { Renderer } from "./renderer.js";
import { ClientScene, sceneFromJson } from "./state.js";
import { PoseStreamer } from "./stream.js";
import { PoseSocket } from "./ws.js";

const appHost = document.querySelector<HTMLDivElement>("#app");
if (!appHost) throw new Error("#app container missing");
const app: HTMLDivElement = appHost;

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/pose`;
}

async function bootstrap(): Promise<void> {
  app.innerHTML = "";
  const viewport = document.createElement("div");
  viewport.className = "viewport";
  const canvas = document.createElement("canvas");
  viewport.appendChild(canvas);
  const side = document.createElement("div");
  side.className = "panel";
  app.append(viewport, side);

  let scene: ClientScene;
  try {
    const response = await fetch("/scene");
    if (!response.ok) {
      throw new Error(`scene request failed: ${response.status} ${response.statusText}`);
    }
    scene = new ClientScene(sceneFromJson(await response.json()));
  } catch (err) {
    errorBanner(app, `Could not load scene: ${err instanceof Error ? err.message : err}`, () => {
      void bootstrap();
    });
    return;
  }

  const renderer = new Renderer(canvas);
  renderer.setMesh(scene.positions, scene.indices);
  const refreshSkeleton = () => {
    const snap = scene.poseSnapshot();
    const { positions } = worldJoints(scene.skeleton, snap.rotations, snap.root);
    renderer.setSkeleton(positions, scene.info.bones);
  };
  refreshSkeleton();

  const sendTimes = new Map<number, number>();
  const socket = new PoseSocket(wsUrl(), {
    onBinary: (data) => {
      let frame;
      try {
        frame = decodeFrame(data);
      } catch (err) {
        console.error("bad frame:", err);
        return;
      }
      const sentAt = sendTimes.get(frame.seq);
      for (const seq of sendTimes.keys()) {
        if (seq <= frame.seq) sendTimes.delete(seq);
      }
      const rtt = sentAt === undefined ? 0 : performance.now() - sentAt;
      if (scene.acceptFrame(frame, rtt)) {
        renderer.updatePositions(scene.positions);
        panel.showError(null);
        panel.updateStats();
      }
      streamer.onReply(frame.seq);
    },
    onText: (text) => {
      let error;
      try {
        error = decodeError(text);
      } catch (err) {
        console.error("bad text frame:", err);
        return;
      }
      panel.showError(`server: ${error.message}`);
      streamer.onReply(error.seq ?? Number.MAX_SAFE_INTEGER);
    },
    onStatus: (connected) => {
      panel.setConnection(connected);
      if (connected) {
        pushPose();
      }
    },
  });

  const streamer = new PoseStreamer((text) => {
    const seq = (JSON.parse(text) as { seq: number }).seq;
    sendTimes.set(seq, performance.now());
    if (!socket.send(text)) {
      sendTimes.delete(seq);
    }
  });

  const pushPose = () => {
    const snap = scene.poseSnapshot();
    streamer.submit(snap.root, snap.rotations);
    refreshSkeleton();
  };

  const panel = new Panel(side, scene, {
    onPoseChange: pushPose,
    onReset: pushPose,
  });

  socket.connect();
  const loop = () => {
    renderer.draw();
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

void bootstrap();
