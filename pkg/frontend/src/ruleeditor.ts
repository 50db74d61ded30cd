/** Context-rule editor: validates the rule schema client-side, uploads on
 * success, and lists the per-rule outcomes (including cycle rejections). */

import { ApiError, Client, RuleOutcome } from "./api.js";
import { validateRules } from "./rules.js";

const TEMPLATE = `rule_id: "parking_queue_overflow"
condition:
  metric: "valetparking_cpu_by_pod"
  threshold: 80.0
  operator: ">"
inject_node: "parking_queue"
inject_edge:
  from: "parking_queue"
  to: "valetparking_cpu_by_pod"
`;

export class RuleEditor {
  readonly root: HTMLElement;
  private textarea: HTMLTextAreaElement;
  private feedback: HTMLElement;
  private outcomes: HTMLElement;

  constructor(private client: Client, private onUploaded: () => void = () => {}) {
    this.root = document.createElement("section");
    this.root.className = "rule-editor";

    const heading = document.createElement("h3");
    heading.textContent = "Context rules";
    this.root.appendChild(heading);

    this.textarea = document.createElement("textarea");
    this.textarea.rows = 12;
    this.textarea.value = TEMPLATE;
    this.textarea.spellcheck = false;
    this.root.appendChild(this.textarea);

    const upload = document.createElement("button");
    upload.textContent = "validate & upload";
    upload.className = "upload-button";
    upload.addEventListener("click", () => void this.upload());
    this.root.appendChild(upload);

    this.feedback = document.createElement("p");
    this.feedback.className = "rule-feedback";
    this.root.appendChild(this.feedback);

    this.outcomes = document.createElement("ul");
    this.outcomes.className = "rule-outcomes";
    this.root.appendChild(this.outcomes);
  }

  async upload(): Promise<void> {
    this.outcomes.innerHTML = "";
    const validation = validateRules(this.textarea.value);
    if (!validation.ok) {
      this.feedback.textContent = `✗ ${validation.error}`;
      this.feedback.className = "rule-feedback error";
      return;
    }
    try {
      const outcomes = await this.client.uploadRules(this.textarea.value);
      this.feedback.textContent = `✓ ${validation.rules.length} rule(s) accepted`;
      this.feedback.className = "rule-feedback ok";
      this.renderOutcomes(outcomes);
      this.onUploaded();
    } catch (err) {
      const message = err instanceof ApiError ? err.message : "upload failed";
      this.feedback.textContent = `✗ server rejected rules: ${message}`;
      this.feedback.className = "rule-feedback error";
    }
  }

  private renderOutcomes(outcomes: RuleOutcome[]): void {
    for (const outcome of outcomes) {
      const item = document.createElement("li");
      const state = outcome.injected ? "injected" : outcome.fired ? "rejected" : "idle";
      item.className = `outcome outcome-${state}`;
      item.textContent = `${outcome.rule_id}: ${outcome.reason}`;
      this.outcomes.appendChild(item);
    }
  }
}
