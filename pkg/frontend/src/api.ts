/** Typed client for the diagnosis server. Every UI action maps to exactly
 * one of these calls; the client keeps no state of its own. */

export type QueryTriplet = {
  query_id: string;
  target: string;
  candidate_a: string;
  candidate_b: string;
  uncertainty: number;
};

export type AnswerResult = { accepted: boolean; retrain_triggered: boolean };

export type GraphEdge = {
  source: string;
  target: string;
  confidence: number;
  provenance: "base" | "policy" | "rule";
};

export type GraphPayload = { stage: string; nodes: string[]; edges: GraphEdge[] };

export type RuleOutcome = {
  rule_id: string;
  fired: boolean;
  injected: boolean;
  reason: string;
};

export type RcaEntry = { node: string; score: number };
export type RcaResult = { anomaly: string; ranked: RcaEntry[] };

export type RecentMetrics = { samples: number; series: Record<string, number[]> };

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let message = `${response.status}`;
    try {
      const body = await response.json();
      message = body.message ?? message;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(private base: string = "") {}

  nextQuery(): Promise<QueryTriplet> {
    return fetch(`${this.base}/feedback/next`).then((r) => asJson<QueryTriplet>(r));
  }

  answer(queryId: string, choice: "a" | "b"): Promise<AnswerResult> {
    return fetch(`${this.base}/feedback/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, choice }),
    }).then((r) => asJson<AnswerResult>(r));
  }

  graph(stage: string): Promise<GraphPayload> {
    return fetch(`${this.base}/graph/${stage}`).then((r) => asJson<GraphPayload>(r));
  }

  groundTruth(): Promise<GraphPayload> {
    return fetch(`${this.base}/ground-truth`).then((r) => asJson<GraphPayload>(r));
  }

  uploadRules(text: string): Promise<RuleOutcome[]> {
    return fetch(`${this.base}/rules`, { method: "POST", body: text }).then((r) =>
      asJson<RuleOutcome[]>(r),
    );
  }

  rca(anomaly?: string): Promise<RcaResult> {
    return fetch(`${this.base}/rca`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(anomaly ? { anomaly } : {}),
    }).then((r) => asJson<RcaResult>(r));
  }

  startRun(source: "oracle" | "interactive", budget: number): Promise<{ run_id: string }> {
    return fetch(`${this.base}/run`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ feedback_source: source, budget }),
    }).then((r) => asJson<{ run_id: string }>(r));
  }

  run(runId: string): Promise<{ status: string; answered: number }> {
    return fetch(`${this.base}/run/${runId}`).then((r) =>
      asJson<{ status: string; answered: number }>(r),
    );
  }

  recentMetrics(nodes: string[], samples = 120): Promise<RecentMetrics> {
    const params = new URLSearchParams({ nodes: nodes.join(","), samples: String(samples) });
    return fetch(`${this.base}/metrics/recent?${params}`).then((r) =>
      asJson<RecentMetrics>(r),
    );
  }
}
