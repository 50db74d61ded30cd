"""Contrastive GNN encoder: per-node summary features -> unit embeddings.

Two variants share the two-layer shape 6 -> hidden -> d with row
L2-normalization at the output:

* ``gcn``: symmetric-normalized propagation ``S = D^-1/2 (A + I) D^-1/2``,
  ``Z = S relu(S X W1) W2``.
* ``gat``: single-head attention, scores
  ``e_ij = leakyrelu(a_src . u_i + a_dst . u_j)`` softmax-normalized over
  ``N(i) + {i}``.

Training minimizes the averaged hinge triplet loss
``max(0, margin + d(a,p) - d(a,n))`` with ``d(u,v) = 1 - cos(u,v)``,
positives drawn from skeleton adjacency and negatives from non-adjacent
pairs. Full-batch gradient descent; all gradients are hand-derived and
verified against finite differences in the test suite. Trained parameters
are frozen (arrays marked read-only).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import NodeId
from .ingest import MetricBatch
from .pc import Skeleton

FEATURE_DIM = 6
LEAKY_SLOPE = 0.2


@dataclass
class NodeFeatures:
    """Standardized per-node summary statistics, row i belongs to node_ids[i]."""

    node_ids: list[NodeId]
    matrix: np.ndarray  # (n, 6): mean, std, lag-1 autocorr, min, max, slope

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (len(self.node_ids), FEATURE_DIM):
            raise ValueError(f"feature matrix shape {self.matrix.shape} invalid")
        if not np.isfinite(self.matrix).all():
            raise ValueError("features must be finite")


def node_features(batch: MetricBatch) -> NodeFeatures:
    """Summary-statistic features, standardized per feature across nodes."""
    rows = []
    t = np.arange(batch.n_samples, dtype=float)
    t_center = t - t.mean()
    denom = float(t_center @ t_center)
    for i, _ in enumerate(batch.node_ids):
        x = batch.values[i]
        std = float(x.std())
        if std > 1e-12 and x[:-1].std() > 1e-12 and x[1:].std() > 1e-12:
            lag1 = float(np.corrcoef(x[:-1], x[1:])[0, 1])
        else:
            lag1 = 0.0
        slope = float((t_center @ (x - x.mean())) / denom)
        rows.append([float(x.mean()), std, lag1, float(x.min()), float(x.max()), slope])
    matrix = np.array(rows)
    mean = matrix.mean(axis=0)
    scale = matrix.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return NodeFeatures(node_ids=list(batch.node_ids), matrix=(matrix - mean) / scale)


@dataclass
class EncoderParams:
    variant: str
    w1: np.ndarray
    w2: np.ndarray
    a1: np.ndarray | None = None  # gat layer-1 attention, (2*hidden,)
    a2: np.ndarray | None = None  # gat layer-2 attention, (2*out_dim,)
    margin: float = 0.5
    loss_history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.variant not in ("gcn", "gat"):
            raise ValueError(f"unknown encoder variant {self.variant!r}")
        if self.variant == "gat" and (self.a1 is None or self.a2 is None):
            raise ValueError("gat variant requires attention vectors")

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"w1": self.w1, "w2": self.w2}
        if self.variant == "gat":
            out["a1"] = self.a1
            out["a2"] = self.a2
        return out

    def freeze(self) -> "EncoderParams":
        for arr in self.arrays().values():
            arr.setflags(write=False)
        return self

    def to_dict(self) -> dict:
        data = {
            "variant": self.variant,
            "margin": self.margin,
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
        }
        if self.variant == "gat":
            data["a1"] = self.a1.tolist()
            data["a2"] = self.a2.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderParams":
        params = cls(
            variant=data["variant"],
            w1=np.array(data["w1"]),
            w2=np.array(data["w2"]),
            a1=np.array(data["a1"]) if "a1" in data else None,
            a2=np.array(data["a2"]) if "a2" in data else None,
            margin=data.get("margin", 0.5),
        )
        return params.freeze()


def init_params(
    variant: str = "gcn",
    hidden: int = 32,
    out_dim: int = 16,
    margin: float = 0.5,
    seed: int = 0,
) -> EncoderParams:
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    w1 = glorot(FEATURE_DIM, hidden)
    w2 = glorot(hidden, out_dim)
    if variant == "gat":
        a1 = rng.uniform(-0.3, 0.3, size=2 * hidden)
        a2 = rng.uniform(-0.3, 0.3, size=2 * out_dim)
        return EncoderParams(variant, w1, w2, a1, a2, margin=margin)
    return EncoderParams(variant, w1, w2, margin=margin)


def _neighbor_lists(node_ids: list[NodeId], skeleton: Skeleton) -> list[np.ndarray]:
    """Index arrays N(i) + {i}, sorted, for the gat aggregation."""
    index = {n: i for i, n in enumerate(node_ids)}
    unknown = [n for n in skeleton.nodes if n not in index]
    if unknown:
        raise ValueError(f"skeleton nodes missing from features: {unknown}")
    lists = []
    for node in node_ids:
        neigh = [index[m] for m in skeleton.neighbors(node) if m in index]
        lists.append(np.array(sorted({index[node], *neigh}), dtype=int))
    return lists


def _norm_adjacency(n: int, neighbor_lists: list[np.ndarray]) -> np.ndarray:
    adj = np.zeros((n, n))
    for i, js in enumerate(neighbor_lists):
        adj[i, js] = 1.0  # includes the self-loop
    deg = adj.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return adj * inv_sqrt[:, None] * inv_sqrt[None, :]


def _leaky(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def _forward(params: EncoderParams, x: np.ndarray, neighbor_lists: list[np.ndarray]):
    """Full forward pass; returns (Z, cache) with everything backprop needs."""
    n = x.shape[0]
    if params.variant == "gcn":
        s = _norm_adjacency(n, neighbor_lists)
        m1 = s @ x
        p1 = m1 @ params.w1
        h = np.maximum(p1, 0.0)
        m2 = s @ h
        p2 = m2 @ params.w2
        cache = {"s": s, "m1": m1, "p1": p1, "h": h, "m2": m2, "p2": p2, "x": x}
    else:
        u1, agg1, att1 = _gat_layer(x, params.w1, params.a1, neighbor_lists)
        h = np.maximum(agg1, 0.0)
        u2, agg2, att2 = _gat_layer(h, params.w2, params.a2, neighbor_lists)
        p2 = agg2
        cache = {
            "x": x, "u1": u1, "agg1": agg1, "att1": att1,
            "h": h, "u2": u2, "att2": att2, "p2": p2,
        }
    norms = np.linalg.norm(p2, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("zero-norm embedding; degenerate parameters")
    z = p2 / norms[:, None]
    cache["z"] = z
    cache["norms"] = norms
    return z, cache


def _gat_layer(x, w, a, neighbor_lists):
    """Single-head attention layer; returns (u, aggregated, per-node softmax info)."""
    fout = w.shape[1]
    u = x @ w
    src = u @ a[:fout]
    dst = u @ a[fout:]
    agg = np.zeros((x.shape[0], fout))
    att = []
    for i, js in enumerate(neighbor_lists):
        pre = src[i] + dst[js]
        act = _leaky(pre)
        act = act - act.max()  # stable softmax
        expv = np.exp(act)
        alpha = expv / expv.sum()
        agg[i] = alpha @ u[js]
        att.append({"js": js, "pre": pre, "alpha": alpha})
    return u, agg, att


def _rownorm_backward(dz, cache):
    z, norms = cache["z"], cache["norms"]
    return (dz - z * (dz * z).sum(axis=1, keepdims=True)) / norms[:, None]


def _gat_layer_backward(dagg, x, w, a, u, att):
    fout = w.shape[1]
    du = np.zeros_like(u)
    dsrc = np.zeros(u.shape[0])
    ddst = np.zeros(u.shape[0])
    for i, info in enumerate(att):
        js, pre, alpha = info["js"], info["pre"], info["alpha"]
        dalpha = u[js] @ dagg[i]
        du[js] += alpha[:, None] * dagg[i][None, :]
        de = alpha * (dalpha - float(dalpha @ alpha))
        dpre = de * np.where(pre > 0, 1.0, LEAKY_SLOPE)
        dsrc[i] += dpre.sum()
        np.add.at(ddst, js, dpre)
    da_src = u.T @ dsrc
    da_dst = u.T @ ddst
    du += np.outer(dsrc, a[:fout]) + np.outer(ddst, a[fout:])
    dw = x.T @ du
    dx = du @ w.T
    return dw, np.concatenate([da_src, da_dst]), dx


def triplet_loss_and_grads(
    params: EncoderParams,
    x: np.ndarray,
    neighbor_lists: list[np.ndarray],
    triplets: np.ndarray,
):
    """Averaged hinge triplet loss and analytic parameter gradients.

    ``triplets`` is an integer array (B, 3) of (anchor, positive, negative)
    row indices into ``x``.
    """
    z, cache = _forward(params, x, neighbor_lists)
    ia, ip, ineg = triplets[:, 0], triplets[:, 1], triplets[:, 2]
    s_ap = np.sum(z[ia] * z[ip], axis=1)
    s_an = np.sum(z[ia] * z[ineg], axis=1)
    hinge = params.margin - s_ap + s_an
    active = hinge > 0
    batch = len(triplets)
    loss = float(np.sum(hinge[active])) / batch

    dz = np.zeros_like(z)
    w = active.astype(float) / batch
    np.add.at(dz, ia, (z[ineg] - z[ip]) * w[:, None])
    np.add.at(dz, ip, -z[ia] * w[:, None])
    np.add.at(dz, ineg, z[ia] * w[:, None])

    dp2 = _rownorm_backward(dz, cache)
    if params.variant == "gcn":
        s = cache["s"]
        dw2 = cache["m2"].T @ dp2
        dh = s.T @ (dp2 @ params.w2.T)
        dp1 = dh * (cache["p1"] > 0)
        dw1 = cache["m1"].T @ dp1
        grads = {"w1": dw1, "w2": dw2}
    else:
        dw2, da2, dh = _gat_layer_backward(
            dp2, cache["h"], params.w2, params.a2, cache["u2"], cache["att2"]
        )
        dagg1 = dh * (cache["agg1"] > 0)
        dw1, da1, _ = _gat_layer_backward(
            dagg1, cache["x"], params.w1, params.a1, cache["u1"], cache["att1"]
        )
        grads = {"w1": dw1, "w2": dw2, "a1": da1, "a2": da2}
    return loss, grads


def triplet_loss(params, x, neighbor_lists, triplets) -> float:
    loss, _ = triplet_loss_and_grads(params, x, neighbor_lists, triplets)
    return loss


def gradient_check(
    params: EncoderParams,
    x: np.ndarray,
    neighbor_lists: list[np.ndarray],
    triplets: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = triplet_loss_and_grads(params, x, neighbor_lists, triplets)
    worst = 0.0
    for name, arr in params.arrays().items():
        work = arr.copy()
        probe = EncoderParams(
            params.variant,
            work if name == "w1" else params.w1.copy(),
            work if name == "w2" else params.w2.copy(),
            a1=None if params.a1 is None else (work if name == "a1" else params.a1.copy()),
            a2=None if params.a2 is None else (work if name == "a2" else params.a2.copy()),
            margin=params.margin,
        )
        target = probe.arrays()[name]
        flat = target.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = triplet_loss(probe, x, neighbor_lists, triplets)
            flat[k] = orig - step
            down = triplet_loss(probe, x, neighbor_lists, triplets)
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].reshape(-1)[k]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def build_triplets(
    skeleton: Skeleton,
    node_ids: list[NodeId],
    rng: np.random.Generator,
    negatives_per_pair: int = 4,
) -> np.ndarray:
    """Fixed triplet bank: each adjacency pair anchors both ways, negatives
    drawn uniformly from the anchor's non-adjacent nodes."""
    index = {n: i for i, n in enumerate(node_ids)}
    rows = []
    for a, b in skeleton.pairs():
        for anchor, pos in ((a, b), (b, a)):
            pool = skeleton.non_adjacent(anchor)
            if not pool:
                continue
            picks = rng.choice(len(pool), size=negatives_per_pair, replace=True)
            for k in picks:
                rows.append((index[anchor], index[pos], index[pool[k]]))
    if not rows:
        raise ValueError("no valid triplet: skeleton needs an edge and a non-edge")
    return np.array(rows, dtype=int)


def train_contrastive(
    features: NodeFeatures,
    adjacency: Skeleton,
    epochs: int = 500,
    lr: float = 1e-3,
    seed: int = 0,
    variant: str = "gcn",
    hidden: int = 32,
    out_dim: int = 16,
    margin: float = 0.5,
) -> EncoderParams:
    """Full-batch gradient descent on the triplet bank; deterministic given seed."""
    rng = np.random.default_rng(seed)
    params = init_params(variant, hidden, out_dim, margin, seed=seed)
    neighbor_lists = _neighbor_lists(features.node_ids, adjacency)
    triplets = build_triplets(adjacency, features.node_ids, rng)
    x = features.matrix
    for _ in range(epochs):
        loss, grads = triplet_loss_and_grads(params, x, neighbor_lists, triplets)
        params.loss_history.append(loss)
        for name, grad in grads.items():
            arr = getattr(params, name)
            setattr(params, name, arr - lr * grad)
    return params.freeze()


def encode(
    params: EncoderParams, features: NodeFeatures, adjacency: Skeleton
) -> dict[NodeId, np.ndarray]:
    """Frozen-encoder forward pass; returns unit-norm embedding per node."""
    neighbor_lists = _neighbor_lists(features.node_ids, adjacency)
    z, _ = _forward(params, features.matrix, neighbor_lists)
    out = {}
    for i, node in enumerate(features.node_ids):
        vec = z[i].copy()
        vec.setflags(write=False)
        out[node] = vec
    return out
