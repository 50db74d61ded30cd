/** Application shell: stage-graph explorer with ground-truth overlay, the
 * feedback query panel, the rule editor, and the RCA panel. The client is
 * stateless: every view re-fetches from the server on demand, so a refresh
 * reproduces the page exactly. */

import { ApiError, Client, GraphPayload } from "./api.js";
import { renderGraph } from "./graphview.js";
import { QueryPanel } from "./querypanel.js";
import { RcaPanel } from "./rcapanel.js";
import { RuleEditor } from "./ruleeditor.js";

const STAGES = ["raw", "feedback_adjusted", "pruned", "context_extended"];

export class GraphExplorer {
  readonly root: HTMLElement;
  private views: { select: HTMLSelectElement; host: HTMLElement }[] = [];
  private overlay: HTMLInputElement;

  constructor(private client: Client) {
    this.root = document.createElement("section");
    this.root.className = "graph-explorer";

    const controls = document.createElement("div");
    controls.className = "graph-controls";
    const overlayLabel = document.createElement("label");
    this.overlay = document.createElement("input");
    this.overlay.type = "checkbox";
    this.overlay.checked = true;
    overlayLabel.appendChild(this.overlay);
    overlayLabel.appendChild(
      document.createTextNode(" ground-truth overlay (green = match, red = missing)"),
    );
    controls.appendChild(overlayLabel);
    const refresh = document.createElement("button");
    refresh.textContent = "refresh";
    refresh.addEventListener("click", () => void this.refresh());
    controls.appendChild(refresh);
    this.root.appendChild(controls);

    const panes = document.createElement("div");
    panes.className = "graph-panes";
    for (const initial of ["feedback_adjusted", "context_extended"]) {
      const pane = document.createElement("div");
      pane.className = "graph-pane";
      const select = document.createElement("select");
      for (const stage of STAGES) {
        const option = document.createElement("option");
        option.value = stage;
        option.textContent = stage;
        if (stage === initial) option.selected = true;
        select.appendChild(option);
      }
      select.addEventListener("change", () => void this.refresh());
      const host = document.createElement("div");
      host.className = "graph-host";
      pane.appendChild(select);
      pane.appendChild(host);
      panes.appendChild(pane);
      this.views.push({ select, host });
    }
    this.root.appendChild(panes);
    this.overlay.addEventListener("change", () => void this.refresh());
  }

  async refresh(): Promise<void> {
    let truth: GraphPayload | null = null;
    if (this.overlay.checked) {
      try {
        truth = await this.client.groundTruth();
      } catch {
        truth = null; // no ground truth on this deployment
      }
    }
    await Promise.all(
      this.views.map(async ({ select, host }) => {
        host.innerHTML = "";
        try {
          const graph = await this.client.graph(select.value); // always re-fetch
          host.appendChild(renderGraph(graph, truth));
          const caption = document.createElement("p");
          caption.className = "graph-caption";
          caption.textContent = `${graph.stage}: ${graph.edges.length} edges`;
          host.appendChild(caption);
        } catch (err) {
          const message = document.createElement("p");
          message.className = "empty-state";
          message.textContent =
            err instanceof ApiError && err.status === 404
              ? `stage "${select.value}" not produced yet`
              : "could not load graph";
          host.appendChild(message);
        }
      }),
    );
  }
}

export class App {
  readonly root: HTMLElement;
  readonly queryPanel: QueryPanel;
  readonly explorer: GraphExplorer;
  readonly ruleEditor: RuleEditor;
  readonly rcaPanel: RcaPanel;
  private counter: HTMLElement;
  private toasts: HTMLElement;

  constructor(client: Client) {
    this.root = document.createElement("div");
    this.root.className = "app";

    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "causal diagnosis console";
    header.appendChild(title);
    this.counter = document.createElement("span");
    this.counter.className = "answer-counter";
    this.counter.textContent = "0 answered";
    header.appendChild(this.counter);
    const startRun = document.createElement("button");
    startRun.textContent = "start feedback run";
    startRun.addEventListener("click", () => {
      void client
        .startRun("interactive", 30)
        .then((r) => this.toast(`run ${r.run_id} started`))
        .catch((err) =>
          this.toast(err instanceof ApiError ? err.message : "run failed to start"),
        );
    });
    header.appendChild(startRun);
    this.root.appendChild(header);

    this.toasts = document.createElement("div");
    this.toasts.className = "toasts";
    this.root.appendChild(this.toasts);

    this.queryPanel = new QueryPanel(
      client,
      (msg) => this.toast(msg),
      () => {
        this.counter.textContent = `${this.queryPanel.answered} answered`;
        void this.explorer.refresh();
      },
    );
    this.explorer = new GraphExplorer(client);
    this.ruleEditor = new RuleEditor(client, () => void this.explorer.refresh());
    this.rcaPanel = new RcaPanel(client);

    const main = document.createElement("main");
    const left = document.createElement("div");
    left.className = "column";
    left.appendChild(this.queryPanel.root);
    left.appendChild(this.ruleEditor.root);
    left.appendChild(this.rcaPanel.root);
    const right = document.createElement("div");
    right.className = "column wide";
    right.appendChild(this.explorer.root);
    main.appendChild(left);
    main.appendChild(right);
    this.root.appendChild(main);
  }

  toast(message: string): void {
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = message;
    this.toasts.appendChild(node);
    setTimeout(() => node.remove(), 6000);
  }

  start(): void {
    this.queryPanel.start();
    void this.explorer.refresh();
  }
}
