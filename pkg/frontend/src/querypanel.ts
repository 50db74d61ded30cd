/** Expert feedback panel: polls for the oldest pending comparison, shows
 * the target and both candidate predecessors with recent metric
 * sparklines, and submits a/b answers. Server state is authoritative; the
 * panel re-polls after every action. */

import { ApiError, Client, QueryTriplet } from "./api.js";
import { sparkline } from "./sparkline.js";

const POLL_MS = 1000;

export class QueryPanel {
  readonly root: HTMLElement;
  answered = 0;
  private current: QueryTriplet | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private backoff = POLL_MS;

  constructor(
    private client: Client,
    private onToast: (message: string) => void,
    private onAnswered: () => void = () => {},
  ) {
    this.root = document.createElement("section");
    this.root.className = "query-panel";
    this.renderEmpty("connecting…");
  }

  start(): void {
    void this.poll();
  }

  stop(): void {
    if (this.timer) clearTimeout(this.timer);
    this.timer = null;
  }

  private schedule(delay: number): void {
    if (this.timer) clearTimeout(this.timer);
    this.timer = setTimeout(() => void this.poll(), delay);
  }

  async poll(): Promise<void> {
    try {
      const query = await this.client.nextQuery();
      this.backoff = POLL_MS;
      if (this.current?.query_id !== query.query_id) {
        this.current = query;
        await this.renderQuery(query);
      }
      this.schedule(POLL_MS);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.current = null;
        this.renderEmpty("no pending queries");
        this.backoff = POLL_MS;
      } else {
        this.renderEmpty("server unreachable, retrying…");
        this.backoff = Math.min(this.backoff * 2, 15_000);
      }
      this.schedule(this.backoff);
    }
  }

  private renderEmpty(message: string): void {
    this.root.innerHTML = "";
    const status = document.createElement("p");
    status.className = "empty-state";
    status.textContent = message;
    this.root.appendChild(status);
  }

  private async renderQuery(query: QueryTriplet): Promise<void> {
    this.root.innerHTML = "";
    const heading = document.createElement("h3");
    heading.textContent = `Which is the more likely cause of ${query.target}?`;
    this.root.appendChild(heading);

    const meta = document.createElement("p");
    meta.className = "query-meta";
    meta.textContent = `query ${query.query_id} · uncertainty ${query.uncertainty.toFixed(2)}`;
    this.root.appendChild(meta);

    let series: Record<string, number[]> = {};
    try {
      const metrics = await this.client.recentMetrics(
        [query.target, query.candidate_a, query.candidate_b],
        120,
      );
      series = metrics.series;
    } catch {
      /* sparklines are decoration; the comparison stays answerable */
    }

    const target = document.createElement("div");
    target.className = "target-card";
    target.appendChild(this.card(query.target, series[query.target]));
    this.root.appendChild(target);

    const choices = document.createElement("div");
    choices.className = "choices";
    (["a", "b"] as const).forEach((choice) => {
      const candidate = choice === "a" ? query.candidate_a : query.candidate_b;
      const button = document.createElement("button");
      button.className = "choice-button";
      button.dataset.choice = choice;
      button.appendChild(this.card(candidate, series[candidate]));
      button.addEventListener("click", () => void this.submit(query, choice));
      choices.appendChild(button);
    });
    this.root.appendChild(choices);
  }

  private card(node: string, values?: number[]): HTMLElement {
    const card = document.createElement("div");
    card.className = "metric-card";
    const name = document.createElement("div");
    name.className = "metric-name";
    name.textContent = node;
    card.appendChild(name);
    if (values && values.length > 1) {
      card.appendChild(sparkline(values));
    }
    return card;
  }

  private async submit(query: QueryTriplet, choice: "a" | "b"): Promise<void> {
    try {
      const result = await this.client.answer(query.query_id, choice);
      this.answered += 1;
      this.onAnswered();
      if (result.retrain_triggered) {
        this.onToast("retraining triggered — the edge policy is being refreshed");
      }
    } catch (err) {
      if (err instanceof ApiError && (err.status === 404 || err.status === 409)) {
        this.onToast(`query already resolved (${err.status})`);
      } else {
        this.onToast("answer failed; retrying soon");
      }
    }
    this.current = null;
    this.schedule(50); // advance to the next query promptly
  }
}
