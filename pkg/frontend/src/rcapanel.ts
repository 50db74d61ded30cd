/** Root-cause panel: triggers the analysis and renders the ranked list. */

import { ApiError, Client } from "./api.js";

export class RcaPanel {
  readonly root: HTMLElement;
  private list: HTMLElement;
  private status: HTMLElement;
  private input: HTMLInputElement;

  constructor(private client: Client) {
    this.root = document.createElement("section");
    this.root.className = "rca-panel";

    const heading = document.createElement("h3");
    heading.textContent = "Root cause analysis";
    this.root.appendChild(heading);

    const controls = document.createElement("div");
    controls.className = "rca-controls";
    this.input = document.createElement("input");
    this.input.placeholder = "anomaly node (blank = auto-detect)";
    controls.appendChild(this.input);
    const button = document.createElement("button");
    button.textContent = "analyze";
    button.addEventListener("click", () => void this.analyze());
    controls.appendChild(button);
    this.root.appendChild(controls);

    this.status = document.createElement("p");
    this.status.className = "rca-status";
    this.root.appendChild(this.status);

    this.list = document.createElement("ol");
    this.list.className = "rca-ranking";
    this.root.appendChild(this.list);
  }

  async analyze(): Promise<void> {
    this.list.innerHTML = "";
    this.status.textContent = "walking…";
    try {
      const anomaly = this.input.value.trim() || undefined;
      const result = await this.client.rca(anomaly);
      this.status.textContent = `anomaly: ${result.anomaly}`;
      for (const entry of result.ranked) {
        const item = document.createElement("li");
        item.className = "rca-entry";
        const bar = document.createElement("span");
        bar.className = "rca-bar";
        bar.style.width = `${Math.round(entry.score * 220)}px`;
        const label = document.createElement("span");
        label.textContent = ` ${entry.node} — ${entry.score.toFixed(3)}`;
        item.appendChild(bar);
        item.appendChild(label);
        this.list.appendChild(item);
      }
    } catch (err) {
      this.status.textContent =
        err instanceof ApiError ? `✗ ${err.message}` : "✗ analysis failed";
    }
  }
}
