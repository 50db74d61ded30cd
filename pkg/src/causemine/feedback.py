"""Hierarchical preference-feedback loop.

Pieces, bottom up:

* ``FeedbackStore`` — append-only triplet history (JSONL on disk) plus the
  pending-query queue; survives restarts byte-for-byte.
* Reward model — small MLP scoring concat(target, candidate) embeddings,
  trained with pairwise cross-entropy (Bradley-Terry) on the stored
  preferences. A light L2 pull on the scores anchors their scale, which the
  pairwise loss alone leaves free.
* Low-level policy — DDPG actor/critic over the continuous edge-probability
  action. Replay rewards weight the reward-model score by how firmly the
  action committed, ``(2a - 1) * r``, so the critic's action gradient
  carries the preference signal.
* High-level policy — tabular Q-learning (select/skip) choosing which
  target nodes earn feedback queries.
* Query generation and a ground-truth oracle standing in for the human
  expert.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .decode import sigmoid
from .graph import CausalEdge, CausalGraph, NodeId

Embeddings = dict[NodeId, np.ndarray]


# ---------------------------------------------------------------------------
# persisted records


@dataclass(frozen=True)
class FeedbackTriplet:
    target: NodeId
    preferred: NodeId
    rejected: NodeId
    timestamp: int
    source: str = "human"

    def __post_init__(self) -> None:
        if len({self.target, self.preferred, self.rejected}) != 3:
            raise ValueError("target, preferred and rejected must be distinct")
        if self.source not in ("human", "oracle"):
            raise ValueError(f"unknown feedback source {self.source!r}")

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "target": self.target,
                "preferred": self.preferred,
                "rejected": self.rejected,
                "timestamp": self.timestamp,
                "source": self.source,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "FeedbackTriplet":
        data = json.loads(line)
        return cls(**data)


@dataclass(frozen=True)
class QueryTriplet:
    query_id: str
    target: NodeId
    candidate_a: NodeId
    candidate_b: NodeId
    uncertainty: float

    def __post_init__(self) -> None:
        if len({self.target, self.candidate_a, self.candidate_b}) != 3:
            raise ValueError("query nodes must be distinct")

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "target": self.target,
            "candidate_a": self.candidate_a,
            "candidate_b": self.candidate_b,
            "uncertainty": self.uncertainty,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QueryTriplet":
        return cls(**data)


LOGICAL_TS_BASE = 1_700_000_000


class FeedbackStore:
    """Append-only preference history plus FIFO pending-query queue.

    When ``state_dir`` is given, triplets append to ``feedback.jsonl`` and
    the pending queue (plus the answers-since-retrain counter) mirrors to
    ``pending.json`` after every change; a store constructed on the same
    directory reproduces the exact state.

    The default clock is logical (base + history length): it orders the
    history, survives restarts, and keeps seeded runs byte-reproducible.
    Pass ``clock=time.time`` for wall-clock timestamps.
    """

    def __init__(
        self,
        state_dir: str | Path | None = None,
        retrain_threshold: int = 10,
        clock: Callable[[], float] | None = None,
    ):
        self.retrain_threshold = retrain_threshold
        self.clock = clock if clock is not None else (
            lambda: LOGICAL_TS_BASE + len(self.triplets)
        )
        self._lock = threading.RLock()
        self.triplets: list[FeedbackTriplet] = []
        self.pending: dict[str, QueryTriplet] = {}
        self.answered_since_retrain = 0
        self._answered_ids: set[str] = set()
        self.state_dir = Path(state_dir) if state_dir else None
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            self._load()

    @property
    def _history_path(self) -> Path:
        return self.state_dir / "feedback.jsonl"

    @property
    def _pending_path(self) -> Path:
        return self.state_dir / "pending.json"

    def _load(self) -> None:
        if self._history_path.exists():
            for line in self._history_path.read_text().splitlines():
                if line.strip():
                    self.triplets.append(FeedbackTriplet.from_json_line(line))
        if self._pending_path.exists():
            data = json.loads(self._pending_path.read_text())
            for item in data["pending"]:
                query = QueryTriplet.from_dict(item)
                self.pending[query.query_id] = query
            self.answered_since_retrain = data["answered_since_retrain"]
            self._answered_ids = set(data.get("answered_ids", []))

    def _sync_pending(self) -> None:
        if not self.state_dir:
            return
        payload = {
            "pending": [q.to_dict() for q in self.pending.values()],
            "answered_since_retrain": self.answered_since_retrain,
            "answered_ids": sorted(self._answered_ids),
        }
        self._pending_path.write_text(json.dumps(payload, indent=2, sort_keys=True))

    def add_pending(self, query: QueryTriplet) -> None:
        with self._lock:
            if query.query_id in self.pending:
                raise ValueError(f"duplicate query id {query.query_id!r}")
            self.pending[query.query_id] = query
            self._sync_pending()

    def oldest_pending(self) -> QueryTriplet | None:
        with self._lock:
            return next(iter(self.pending.values()), None)

    def submit_feedback(
        self, query_id: str, choice: str, source: str = "human"
    ) -> bool:
        """Record one answer; returns True when a retrain is now due."""
        if choice not in ("a", "b"):
            raise ValueError(f"choice must be 'a' or 'b', got {choice!r}")
        with self._lock:
            return self._submit_locked(query_id, choice, source)

    def _submit_locked(self, query_id: str, choice: str, source: str) -> bool:
        query = self.pending.get(query_id)
        if query is None:
            if query_id in self._answered_ids:
                raise KeyError(f"query {query_id!r} already answered")
            raise KeyError(f"unknown query id {query_id!r}")
        preferred = query.candidate_a if choice == "a" else query.candidate_b
        rejected = query.candidate_b if choice == "a" else query.candidate_a
        triplet = FeedbackTriplet(
            target=query.target,
            preferred=preferred,
            rejected=rejected,
            timestamp=int(self.clock()),
            source=source,
        )
        self.triplets.append(triplet)
        self._answered_ids.add(query_id)
        if self.state_dir:
            with open(self._history_path, "a") as fh:
                fh.write(triplet.to_json_line() + "\n")
        del self.pending[query_id]
        self.answered_since_retrain += 1
        triggered = self.answered_since_retrain >= self.retrain_threshold
        self._sync_pending()
        return triggered

    def mark_retrained(self) -> None:
        with self._lock:
            self.answered_since_retrain = 0
            self._sync_pending()

    def __len__(self) -> int:
        return len(self.triplets)


# ---------------------------------------------------------------------------
# reward model


@dataclass
class RewardModelParams:
    w1: np.ndarray  # (2d, 32)
    b1: np.ndarray  # (32,)
    w2: np.ndarray  # (32, 1)
    b2: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), [self.b2]])

    def copy(self) -> "RewardModelParams":
        return RewardModelParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def to_dict(self) -> dict:
        return {
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RewardModelParams":
        return cls(
            np.array(data["w1"]), np.array(data["b1"]), np.array(data["w2"]),
            float(data["b2"]),
        )


def init_reward_model(embed_dim: int, hidden: int = 32, seed: int = 0) -> RewardModelParams:
    rng = np.random.default_rng(seed)
    scale1 = 1.0 / np.sqrt(2 * embed_dim)
    scale2 = 1.0 / np.sqrt(hidden)
    return RewardModelParams(
        w1=rng.normal(0, scale1, size=(2 * embed_dim, hidden)),
        b1=np.zeros(hidden),
        w2=rng.normal(0, scale2, size=(hidden, 1)),
        b2=0.0,
    )


def _mlp_forward(params: RewardModelParams, inputs: np.ndarray):
    pre = inputs @ params.w1 + params.b1
    hidden = np.tanh(pre)
    score = hidden @ params.w2[:, 0] + params.b2
    return score, hidden


def _mlp_backward(params, inputs, hidden, dscore):
    dw2 = hidden.T @ dscore
    db2 = float(dscore.sum())
    dhidden = np.outer(dscore, params.w2[:, 0])
    dpre = dhidden * (1.0 - hidden**2)
    dw1 = inputs.T @ dpre
    db1 = dpre.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2[:, None], "b2": db2}


def reward_score(
    params: RewardModelParams, target: np.ndarray, candidate: np.ndarray
) -> float:
    """Quality score of candidate -> target from concatenated embeddings."""
    score, _ = _mlp_forward(params, np.concatenate([target, candidate])[None, :])
    return float(score[0])


def reward_high(
    params: RewardModelParams,
    target: NodeId,
    neighbors: set[NodeId] | list[NodeId],
    embeddings: Embeddings,
) -> float:
    """Aggregated neighborhood reward: sum of pair scores over in-neighbors."""
    return float(
        sum(reward_score(params, embeddings[target], embeddings[n]) for n in sorted(neighbors))
    )


def bt_loss_and_grads(
    params: RewardModelParams,
    inputs_pref: np.ndarray,
    inputs_rej: np.ndarray,
    l2_score: float = 0.0,
):
    """Bradley-Terry loss mean(-ln sigma(r_pref - r_rej)) with optional score L2."""
    s_pref, h_pref = _mlp_forward(params, inputs_pref)
    s_rej, h_rej = _mlp_forward(params, inputs_rej)
    margin = s_pref - s_rej
    prob = sigmoid(margin)
    batch = len(margin)
    loss = float(-np.log(np.clip(prob, 1e-12, None)).mean())
    loss += l2_score * float(np.mean(s_pref**2 + s_rej**2))

    dmargin = -(1.0 - prob) / batch
    ds_pref = dmargin + l2_score * 2.0 * s_pref / batch
    ds_rej = -dmargin + l2_score * 2.0 * s_rej / batch
    g_pref = _mlp_backward(params, inputs_pref, h_pref, ds_pref)
    g_rej = _mlp_backward(params, inputs_rej, h_rej, ds_rej)
    grads = {k: g_pref[k] + g_rej[k] for k in g_pref}
    return loss, grads


def train_reward_model(
    store: FeedbackStore,
    embeddings: Embeddings,
    epochs: int = 300,
    lr: float = 0.05,
    seed: int = 0,
    l2_score: float = 0.01,
) -> RewardModelParams:
    """Fit the reward model to the full stored history; deterministic given seed."""
    if not store.triplets:
        raise ValueError("feedback store is empty; nothing to train on")
    embed_dim = len(next(iter(embeddings.values())))
    params = init_reward_model(embed_dim, seed=seed)
    inputs_pref = np.stack(
        [np.concatenate([embeddings[t.target], embeddings[t.preferred]]) for t in store.triplets]
    )
    inputs_rej = np.stack(
        [np.concatenate([embeddings[t.target], embeddings[t.rejected]]) for t in store.triplets]
    )
    for _ in range(epochs):
        _, grads = bt_loss_and_grads(params, inputs_pref, inputs_rej, l2_score)
        params.w1 -= lr * grads["w1"]
        params.b1 -= lr * grads["b1"]
        params.w2 -= lr * grads["w2"]
        params.b2 -= lr * grads["b2"]
    return params


# ---------------------------------------------------------------------------
# low-level policy (DDPG)


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def step(self, grads: dict, lr: float) -> None:
        self.w1 -= lr * grads["w1"]
        self.b1 -= lr * grads["b1"]
        self.w2 -= lr * grads["w2"]
        self.b2 -= lr * grads["b2"]

    def to_dict(self) -> dict:
        return {
            "w1": self.w1.tolist(), "b1": self.b1.tolist(),
            "w2": self.w2.tolist(), "b2": self.b2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpParams":
        return cls(
            np.array(data["w1"]), np.array(data["b1"]), np.array(data["w2"]),
            float(data["b2"]),
        )


class ReplayBuffer:
    """Ring buffer of (state, action, reward) experiences."""

    def __init__(self, state_dim: int, capacity: int = 1024):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def push(self, state: np.ndarray, action: float, reward: float) -> None:
        self.states[self._next] = state
        self.actions[self._next] = action
        self.rewards[self._next] = reward
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def clear(self) -> None:
        """Drop all experiences (rewards from a superseded reward model)."""
        self.size = 0
        self._next = 0

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("replay buffer is empty")
        idx = rng.integers(0, self.size, size=min(batch_size, self.size))
        return self.states[idx], self.actions[idx], self.rewards[idx]


@dataclass
class LowPolicyParams:
    actor: MlpParams
    critic: MlpParams
    buffer: ReplayBuffer
    noise_std: float = 0.1
    actor_lr: float = 0.01
    critic_lr: float = 0.02
    trained: bool = False

    def to_dict(self) -> dict:
        return {
            "actor": self.actor.to_dict(),
            "critic": self.critic.to_dict(),
            "noise_std": self.noise_std,
            "actor_lr": self.actor_lr,
            "critic_lr": self.critic_lr,
            "trained": self.trained,
        }


def init_low_policy(
    embed_dim: int, hidden: int = 32, capacity: int = 1024, seed: int = 0
) -> LowPolicyParams:
    rng = np.random.default_rng(seed)
    state_dim = 2 * embed_dim

    def mlp(in_dim):
        return MlpParams(
            w1=rng.normal(0, 1.0 / np.sqrt(in_dim), size=(in_dim, hidden)),
            b1=np.zeros(hidden),
            w2=np.zeros((hidden, 1)),  # zero head: untrained actor outputs exactly 0.5
            b2=0.0,
        )

    return LowPolicyParams(
        actor=mlp(state_dim),
        critic=mlp(state_dim + 1),
        buffer=ReplayBuffer(state_dim, capacity),
    )


def actor_forward(actor: MlpParams, states: np.ndarray):
    pre = states @ actor.w1 + actor.b1
    hidden = np.tanh(pre)
    logit = hidden @ actor.w2[:, 0] + actor.b2
    action = sigmoid(logit)
    return action, hidden, logit


def critic_forward(critic: MlpParams, states: np.ndarray, actions: np.ndarray):
    inputs = np.concatenate([states, actions[:, None]], axis=1)
    pre = inputs @ critic.w1 + critic.b1
    hidden = np.tanh(pre)
    q = hidden @ critic.w2[:, 0] + critic.b2
    return q, hidden, inputs


def low_policy_probability(
    params: LowPolicyParams, target: np.ndarray, candidate: np.ndarray
) -> float:
    """Deterministic actor output in [0, 1]; no exploration noise at inference."""
    state = np.concatenate([target, candidate])[None, :]
    action, _, _ = actor_forward(params.actor, state)
    return float(action[0])


def critic_loss_and_grads(critic: MlpParams, states, actions, rewards):
    """MSE regression of Q(s, a) onto the observed immediate reward."""
    q, hidden, inputs = critic_forward(critic, states, actions)
    err = q - rewards
    batch = len(rewards)
    loss = float(np.mean(err**2))
    dq = 2.0 * err / batch
    grads = _mlp_backward_generic(critic, inputs, hidden, dq)
    return loss, grads


def _mlp_backward_generic(params: MlpParams, inputs, hidden, dout):
    dw2 = hidden.T @ dout
    db2 = float(dout.sum())
    dhidden = np.outer(dout, params.w2[:, 0])
    dpre = dhidden * (1.0 - hidden**2)
    dw1 = inputs.T @ dpre
    db1 = dpre.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2[:, None], "b2": db2, "dinputs": dpre @ params.w1.T}


def actor_objective_and_grads(actor: MlpParams, critic: MlpParams, states):
    """Actor loss -mean Q(s, pi(s)) and its gradients (critic held fixed)."""
    actions, a_hidden, _ = actor_forward(actor, states)
    q, c_hidden, c_inputs = critic_forward(critic, states, actions)
    batch = len(actions)
    loss = float(-np.mean(q))

    dq = -np.ones(batch) / batch
    critic_grads = _mlp_backward_generic(critic, c_inputs, c_hidden, dq)
    dactions = critic_grads["dinputs"][:, -1]  # dQ/da per sample
    dlogit = dactions * actions * (1.0 - actions)
    grads = _mlp_backward_generic(actor, states, a_hidden, dlogit)
    grads.pop("dinputs")
    return loss, grads


def ddpg_update(
    params: LowPolicyParams,
    batch_size: int,
    rng: np.random.Generator,
    update_actor: bool = True,
) -> LowPolicyParams:
    """One critic regression step and one actor ascent step from replay.

    ``update_actor=False`` gives a critic-only warmup step; moving the actor
    against a critic that has not yet learned the per-state action gradient
    saturates its sigmoid head and the policy can never recover.
    """
    if params.buffer.size == 0:
        raise ValueError("replay buffer is empty; fill it before updating")
    states, actions, rewards = params.buffer.sample(batch_size, rng)
    _, critic_grads = critic_loss_and_grads(params.critic, states, actions, rewards)
    critic_grads.pop("dinputs")
    params.critic.step(critic_grads, params.critic_lr)
    if update_actor:
        _, actor_grads = actor_objective_and_grads(params.actor, params.critic, states)
        params.actor.step(actor_grads, params.actor_lr)
    return params


def fill_replay(
    params: LowPolicyParams,
    reward_params: RewardModelParams,
    embeddings: Embeddings,
    pairs: list[tuple[NodeId, NodeId]],
    rng: np.random.Generator,
    center_quantile: float = 0.75,
) -> None:
    """Add two experiences per (target, candidate) pair: the noisy policy
    action and one uniform exploration action.

    Reward weights the pair's model score by action commitment,
    ``(2a - 1) * r``: committing toward 1 pays off exactly when the reward
    model scores the edge positive. Pairwise-ranking training leaves the
    score scale and offset free, so scores are centered at the
    ``center_quantile`` of the candidate population (the zero crossing
    becomes the edge/no-edge boundary) and normalized to unit spread, which
    keeps the critic regression stable. The uniform exploration sample
    spreads actions over [0, 1] so the critic can identify the
    action-reward coupling per state; noise around a barely-moved policy
    output alone leaves it invisible.
    """
    scores = np.array(
        [
            reward_score(reward_params, embeddings[t], embeddings[c])
            for t, c in pairs
        ]
    )
    scores = scores - float(np.quantile(scores, center_quantile))
    scale = float(scores.std())
    if scale > 1e-9:
        scores = scores / scale
    for (target, candidate), score in zip(pairs, scores):
        state = np.concatenate([embeddings[target], embeddings[candidate]])
        action, _, _ = actor_forward(params.actor, state[None, :])
        noisy = float(np.clip(action[0] + rng.normal(0, params.noise_std), 0.0, 1.0))
        params.buffer.push(state, noisy, (2.0 * noisy - 1.0) * float(score))
        explore = float(rng.random())
        params.buffer.push(state, explore, (2.0 * explore - 1.0) * float(score))


def decode_feedback_adjusted(
    params: LowPolicyParams, embeddings: Embeddings, tau_policy: float = 0.5
) -> CausalGraph:
    """Graph of ordered pairs whose actor probability exceeds tau_policy."""
    nodes = sorted(embeddings)
    graph = CausalGraph(stage="feedback_adjusted", nodes=set(nodes))
    for src in nodes:
        for dst in nodes:
            if src == dst:
                continue
            prob = low_policy_probability(params, embeddings[dst], embeddings[src])
            if prob > tau_policy:
                graph.add_edge(CausalEdge(src, dst, prob, "policy"))
    return graph


# ---------------------------------------------------------------------------
# high-level policy (tabular Q)


@dataclass
class HighPolicyState:
    q: dict[NodeId, list[float]] = field(default_factory=dict)  # [q_select, q_skip]
    epsilon: float = 0.2
    alpha: float = 0.1
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0,1], got {self.epsilon}")

    def values(self, node: NodeId) -> list[float]:
        return self.q.setdefault(node, [0.0, 0.0])


def select_target_node(
    state: HighPolicyState, candidates: list[NodeId], rng: np.random.Generator
) -> NodeId:
    """Epsilon-greedy argmax of q_select - q_skip; lexicographic tie-break."""
    if not candidates:
        raise ValueError("candidate list is empty")
    if rng.random() < state.epsilon:
        return candidates[int(rng.integers(0, len(candidates)))]
    best, best_gap = None, -np.inf
    for node in sorted(candidates):
        q_select, q_skip = state.values(node)
        gap = q_select - q_skip
        if gap > best_gap:
            best, best_gap = node, gap
    return best


def q_update(state: HighPolicyState, node: NodeId, action: str, reward: float) -> None:
    """Standard tabular update: Q += alpha * (r + gamma * max Q - Q)."""
    if action not in ("select", "skip"):
        raise ValueError(f"unknown action {action!r}")
    values = state.values(node)
    idx = 0 if action == "select" else 1
    values[idx] += state.alpha * (reward + state.gamma * max(values) - values[idx])


# ---------------------------------------------------------------------------
# query generation and the simulated expert


def generate_query(
    policy: LowPolicyParams,
    graph: CausalGraph,
    target: NodeId,
    embeddings: Embeddings,
    query_id: str | None = None,
    exclude: set[tuple[NodeId, NodeId, NodeId]] | None = None,
) -> QueryTriplet:
    """Pick the target's two most uncertain candidate predecessors.

    ``exclude`` holds (target, candidate_a, candidate_b) triples already
    asked; the next most uncertain unasked pair is chosen instead, so a
    session never spends budget re-asking a comparison the policy has not
    changed its mind about. Falls back to the best pair when everything has
    been asked before.
    """
    candidates = sorted(e.source for e in graph.in_edges(target))
    if len(candidates) < 2:
        raise ValueError(f"insufficient candidates for target {target!r}")
    scored = []
    for cand in candidates:
        prob = low_policy_probability(policy, embeddings[target], embeddings[cand])
        scored.append((1.0 - 2.0 * abs(prob - 0.5), cand))
    # most uncertain first; candidate name breaks ties deterministically
    scored.sort(key=lambda item: (-item[0], item[1]))
    ranked_pairs = []
    for i in range(len(scored)):
        for j in range(i + 1, len(scored)):
            u = scored[i][0] + scored[j][0]
            pair = tuple(sorted((scored[i][1], scored[j][1])))
            ranked_pairs.append((-u, pair))
    ranked_pairs.sort()
    chosen = ranked_pairs[0][1]
    if exclude:
        for _, pair in ranked_pairs:
            if (target, *pair) not in exclude:
                chosen = pair
                break
    return QueryTriplet(
        query_id=query_id or uuid.uuid4().hex,
        target=target,
        candidate_a=chosen[0],
        candidate_b=chosen[1],
        uncertainty=1.0 - 2.0 * abs(
            low_policy_probability(policy, embeddings[target], embeddings[chosen[0]]) - 0.5
        ),
    )


def oracle_answer(
    query: QueryTriplet,
    ground_truth: CausalGraph,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> str:
    """Simulated expert: prefer the candidate that truly causes the target."""
    for node in (query.target, query.candidate_a, query.candidate_b):
        if node not in ground_truth.nodes:
            raise ValueError(f"ground truth does not cover node {node!r}")
    edge_a = ground_truth.get_edge(query.candidate_a, query.target)
    edge_b = ground_truth.get_edge(query.candidate_b, query.target)
    if edge_a and not edge_b:
        choice = "a"
    elif edge_b and not edge_a:
        choice = "b"
    elif edge_a and edge_b:
        if edge_a.confidence != edge_b.confidence:
            choice = "a" if edge_a.confidence > edge_b.confidence else "b"
        else:
            choice = "a"  # lexicographic: candidate_a sorts first by construction
    else:
        choice = "a"
    if noise > 0:
        rng = rng or np.random.default_rng()
        if noise >= 1.0 or rng.random() < noise:
            choice = "b" if choice == "a" else "a"
    return choice
