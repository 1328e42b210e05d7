/** Control panel DOM: per-joint rotation sliders, root translation, stats. */

import { fromEulerDegrees } from "./quat.js";
import type { ClientScene } from "./state.js";

export interface PanelHooks {
  onPoseChange: () => void;
  onReset: () => void;
}

export function errorBanner(host: HTMLElement, message: string, onRetry?: () => void): void {
  const banner = document.createElement("div");
  banner.className = "banner error";
  const text = document.createElement("span");
  text.textContent = message;
  banner.appendChild(text);
  if (onRetry) {
    const btn = document.createElement("button");
    btn.textContent = "Retry";
    btn.addEventListener("click", () => {
      banner.remove();
      onRetry();
    });
    banner.appendChild(btn);
  }
  host.prepend(banner);
}

function sliderRow(
  label: string,
  min: number,
  max: number,
  step: number,
  onInput: (value: number) => void,
): { row: HTMLElement; input: HTMLInputElement; readout: HTMLElement } {
  const row = document.createElement("label");
  row.className = "slider-row";
  const name = document.createElement("span");
  name.className = "slider-name";
  name.textContent = label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = "0";
  const readout = document.createElement("span");
  readout.className = "slider-value";
  readout.textContent = "0";
  input.addEventListener("input", () => {
    const value = Number(input.value);
    readout.textContent = input.value;
    onInput(value);
  });
  row.append(name, input, readout);
  return { row, input, readout };
}

export class Panel {
  private scene: ClientScene;
  private hooks: PanelHooks;
  private statusDot: HTMLElement;
  private statusText: HTMLElement;
  private statFields: Record<string, HTMLElement> = {};
  private errorBox: HTMLElement;
  private jointAngles: [number, number, number][];
  private sliders: HTMLInputElement[] = [];

  constructor(host: HTMLElement, scene: ClientScene, hooks: PanelHooks) {
    this.scene = scene;
    this.hooks = hooks;
    this.jointAngles = scene.skeleton.names.map(() => [0, 0, 0]);

    const header = document.createElement("div");
    header.className = "panel-header";
    this.statusDot = document.createElement("span");
    this.statusDot.className = "dot offline";
    this.statusText = document.createElement("span");
    this.statusText.textContent = "connecting";
    const title = document.createElement("strong");
    title.textContent = scene.info.name;
    header.append(this.statusDot, title, this.statusText);
    host.appendChild(header);

    this.errorBox = document.createElement("div");
    this.errorBox.className = "banner error hidden";
    host.appendChild(this.errorBox);

    host.appendChild(this.buildStats());
    host.appendChild(this.buildJointControls());
    host.appendChild(this.buildRootControls());

    const reset = document.createElement("button");
    reset.className = "reset";
    reset.textContent = "Reset pose";
    reset.addEventListener("click", () => {
      this.scene.resetPose();
      this.jointAngles = this.scene.skeleton.names.map(() => [0, 0, 0]);
      for (const input of this.sliders) {
        input.value = "0";
        const readout = input.nextElementSibling as HTMLElement | null;
        if (readout) readout.textContent = "0";
      }
      this.hooks.onReset();
    });
    host.appendChild(reset);
    this.updateStats();
  }

  private buildStats(): HTMLElement {
    const info = this.scene.info;
    const box = document.createElement("dl");
    box.className = "stats";
    const staticRows: [string, string][] = [
      ["vertices", String(info.num_vertices)],
      ["tets", String(info.num_tets)],
      ["material", `${info.material.model} (mu ${info.material.mu})`],
      ["clusters", `${info.clustering.strategy} x ${info.clustering.cluster_sizes.length}`],
      ["pins", `${info.pins.count} @ k=${info.pins.stiffness}`],
    ];
    const liveRows = ["frame", "solve ms", "volume"];
    for (const [label, value] of staticRows) {
      const dt = document.createElement("dt");
      dt.textContent = label;
      const dd = document.createElement("dd");
      dd.textContent = value;
      box.append(dt, dd);
    }
    for (const label of liveRows) {
      const dt = document.createElement("dt");
      dt.textContent = label;
      const dd = document.createElement("dd");
      dd.textContent = "-";
      this.statFields[label] = dd;
      box.append(dt, dd);
    }
    return box;
  }

  private buildJointControls(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "joints";
    this.scene.skeleton.names.forEach((name, j) => {
      const set = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = name;
      set.appendChild(legend);
      (["x", "y", "z"] as const).forEach((axis, k) => {
        const { row, input } = sliderRow(axis, -180, 180, 1, (deg) => {
          this.jointAngles[j][k] = deg;
          const [x, y, z] = this.jointAngles[j];
          this.scene.setJointRotation(j, fromEulerDegrees(x, y, z));
          this.hooks.onPoseChange();
        });
        this.sliders.push(input);
        set.appendChild(row);
      });
      wrap.appendChild(set);
    });
    return wrap;
  }

  private buildRootControls(): HTMLElement {
    const set = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = "root translation";
    set.appendChild(legend);
    const span = this.meshSpan();
    (["x", "y", "z"] as const).forEach((axis, k) => {
      const { row, input } = sliderRow(axis, -span, span, span / 100, (value) => {
        this.scene.rootTranslation[k] = value;
        this.hooks.onPoseChange();
      });
      this.sliders.push(input);
      set.appendChild(row);
    });
    return set;
  }

  private meshSpan(): number {
    const p = this.scene.restPositions;
    const lo = [Infinity, Infinity, Infinity];
    const hi = [-Infinity, -Infinity, -Infinity];
    for (let i = 0; i < p.length; i += 3) {
      for (let k = 0; k < 3; k++) {
        lo[k] = Math.min(lo[k], p[i + k]);
        hi[k] = Math.max(hi[k], p[i + k]);
      }
    }
    const span = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
    return Number.isFinite(span) && span > 0 ? span : 1;
  }

  setConnection(connected: boolean): void {
    this.statusDot.className = connected ? "dot online" : "dot offline";
    this.statusText.textContent = connected ? "live" : "reconnecting";
  }

  showError(message: string | null): void {
    if (message === null) {
      this.errorBox.classList.add("hidden");
      this.errorBox.textContent = "";
    } else {
      this.errorBox.classList.remove("hidden");
      this.errorBox.textContent = message;
    }
  }

  updateStats(): void {
    const { lastSeq, stats } = this.scene;
    this.statFields["frame"].textContent = lastSeq >= 0 ? String(lastSeq) : "-";
    this.statFields["solve ms"].textContent =
      stats.solveMs === null ? "-" : stats.solveMs.toFixed(1);
    this.statFields["volume"].textContent =
      stats.volumePct === null ? "-" : `${stats.volumePct >= 0 ? "+" : ""}${stats.volumePct.toFixed(2)}%`;
  }
}
