"""Chain-of-thoughts referring decoder, forward and backward, in numpy.

Shapes: ``L`` proposals, ``M`` chain slots, ``d`` features, ``n <= M`` mentions.

Forward pass::

    parallel head   alpha_j = softmax(F q_{c_j} / sqrt(d))      per-class query pooling
                    RF_j    = (alpha_j F) W_r                   RF is M x d, rows >= n are zero
                    P       = RF[perm] F^T                      parallel logits, chain order
    queries         X0      = (RF + E)[perm]                    E: sinusoidal rank embedding
    self-attention  X1      = X0 + MHSA(X0)                     causal or unmasked
    cross-attention A       = softmax(X1 F^T / sqrt(d)),  Y = X1 + A F
    CoT head        C       = Y W_h F^T

``perm`` lists mentions in pathway order followed by the padding slots, so
chain position ``k`` holds the ``k``-th object to visit and the target sits at
position ``n - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

MASK_MODES = ("causal", "none")


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    d: int = 768
    L: int = 52
    M: int = 8
    heads: int = 16
    mask_mode: str = "causal"
    lambda_v: float = 5.0
    lambda_t: float = 0.5
    lambda_ref: float = 5.0
    lambda_dist: float = 1.0
    anchor_loss_enabled: bool = True

    def __post_init__(self):
        if self.d < 1 or self.heads < 1 or self.d % self.heads:
            raise ValueError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.M < 1 or self.L < 1:
            raise ValueError("M and L must be at least 1")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}")
        if min(self.lambda_v, self.lambda_t, self.lambda_ref, self.lambda_dist) < 0:
            raise ValueError("loss weights must be non-negative")

    @classmethod
    def toy(cls, **overrides) -> "DecoderConfig":
        return replace(cls(d=8, L=8, M=3, heads=2), **overrides)


@dataclass
class DecoderParams:
    class_queries: np.ndarray  # (n_classes, d)
    w_readout: np.ndarray  # (d, d)
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w_head: np.ndarray  # (d, d)
    w_cls_v: np.ndarray  # (d, n_classes)
    w_cls_t: np.ndarray  # (d, n_classes)
    w_dist: np.ndarray  # (d,)

    @classmethod
    def init(cls, cfg: DecoderConfig, n_classes: int, rng: np.random.Generator, scale: float | None = None):
        s = scale if scale is not None else 1.0 / math.sqrt(cfg.d)
        d = cfg.d
        return cls(
            class_queries=rng.normal(0, 1.0, (n_classes, d)),
            w_readout=rng.normal(0, s, (d, d)),
            wq=rng.normal(0, s, (d, d)),
            wk=rng.normal(0, s, (d, d)),
            wv=rng.normal(0, s, (d, d)),
            wo=rng.normal(0, s, (d, d)),
            w_head=rng.normal(0, s, (d, d)),
            w_cls_v=rng.normal(0, s, (d, n_classes)),
            w_cls_t=rng.normal(0, s, (d, n_classes)),
            w_dist=rng.normal(0, s, (d,)),
        )

    def names(self) -> list[str]:
        return [f.name for f in fields(self)]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names()}

    def zeros_like(self) -> "DecoderParams":
        return DecoderParams(**{k: np.zeros_like(v) for k, v in self.arrays().items()})


@dataclass(frozen=True)
class LossBundle:
    l_cls_V: float
    l_cls_T: float
    l_ref_P: float
    l_ref_COT: float
    l_dist: float
    total: float
    # per chain position contributions to l_ref_P / l_ref_COT
    ref_p_terms: tuple[float, ...] = ()
    ref_cot_terms: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "l_cls_V": self.l_cls_V,
            "l_cls_T": self.l_cls_T,
            "l_ref_P": self.l_ref_P,
            "l_ref_COT": self.l_ref_COT,
            "l_dist": self.l_dist,
            "total": self.total,
        }


def combine_losses(cfg: DecoderConfig, l_v, l_t, l_p, l_cot, l_dist) -> float:
    return cfg.lambda_v * l_v + cfg.lambda_t * l_t + cfg.lambda_ref * (l_p + l_cot) + cfg.lambda_dist * l_dist


# -- building blocks -------------------------------------------------------


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def _softmax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    return p * (dp - np.sum(dp * p, axis=-1, keepdims=True))


def _check_features(F: np.ndarray, cfg: DecoderConfig) -> None:
    if F.ndim != 2 or F.shape[1] != cfg.d:
        raise ValueError(f"expected features of shape (L, {cfg.d}), got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("features must be finite")


def sinusoid(position: int, d: int) -> np.ndarray:
    i = np.arange(d) // 2
    angle = position / np.power(10000.0, 2.0 * i / d)
    return np.where(np.arange(d) % 2 == 0, np.sin(angle), np.cos(angle))


def order_embedding(order: Sequence[int], cfg: DecoderConfig) -> np.ndarray:
    """(M, d) matrix; row ``j`` encodes the pathway rank of mention ``j``, padding rows are 0."""
    order = list(order)
    if len(order) > cfg.M:
        raise CapacityError(f"order of length {len(order)} exceeds M={cfg.M}")
    if sorted(order) != list(range(len(order))):
        raise ValueError("order must be a permutation of 0..n-1")
    E = np.zeros((cfg.M, cfg.d))
    for rank, mention in enumerate(order):
        E[mention] = sinusoid(rank, cfg.d)
    return E


def parallel_refer(F: np.ndarray, mention_classes: Sequence[int], params: DecoderParams,
                   cfg: DecoderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Chain features RF (M, d, mention order) and parallel logits RF F^T (M, L)."""
    _check_features(F, cfg)
    classes = np.asarray(mention_classes, dtype=int)
    if classes.ndim != 1 or not 1 <= len(classes) <= cfg.M:
        raise ValueError(f"need between 1 and {cfg.M} mention classes")
    cache = _parallel(F, classes, params, cfg)
    return cache["RF"], cache["RF"] @ F.T


def _parallel(F, classes, params, cfg):
    n = len(classes)
    sq = math.sqrt(cfg.d)
    Qm = params.class_queries[classes]
    alpha = softmax(Qm @ F.T / sq)
    pool = alpha @ F
    RF = np.zeros((cfg.M, cfg.d))
    RF[:n] = pool @ params.w_readout
    return {"alpha": alpha, "pool": pool, "RF": RF}


def attention_mask(cfg: DecoderConfig, n_valid: int | None = None) -> np.ndarray:
    """Boolean (M, M) matrix; ``True`` where query ``i`` may attend to key ``j``."""
    M = cfg.M
    allowed = np.ones((M, M), dtype=bool)
    if cfg.mask_mode == "causal":
        allowed = np.tril(allowed)
    if n_valid is not None:
        allowed[:, n_valid:] = False
        # padding rows still need one key; slot 0 is always a real mention
        allowed[:, 0] = True
    return allowed


def _mhsa(X, params, cfg, allowed):
    M, d, h = X.shape[0], cfg.d, cfg.heads
    dh = d // h
    Q = (X @ params.wq).reshape(M, h, dh).transpose(1, 0, 2)
    K = (X @ params.wk).reshape(M, h, dh).transpose(1, 0, 2)
    V = (X @ params.wv).reshape(M, h, dh).transpose(1, 0, 2)
    scores = Q @ K.transpose(0, 2, 1) / math.sqrt(dh)
    scores = np.where(allowed[None], scores, -np.inf)
    A = softmax(scores)
    O = (A @ V).transpose(1, 0, 2).reshape(M, d)
    return O @ params.wo, {"Q": Q, "K": K, "V": V, "A": A, "O": O}


def masked_self_attention(X: np.ndarray, params: DecoderParams, cfg: DecoderConfig,
                          n_valid: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Multi-head self-attention over chain rows. Returns (output, weights of shape (heads, M, M))."""
    if X.shape != (cfg.M, cfg.d):
        raise ValueError(f"expected ({cfg.M}, {cfg.d}) chain features, got {X.shape}")
    out, cache = _mhsa(X, params, cfg, attention_mask(cfg, n_valid))
    return out, cache["A"]


def cross_attention(Q: np.ndarray, F: np.ndarray, cfg: DecoderConfig) -> tuple[np.ndarray, np.ndarray]:
    """A = softmax(Q F^T / sqrt(d)) row-wise; returns (A, A F)."""
    _check_features(F, cfg)
    if Q.ndim != 2 or Q.shape[1] != cfg.d:
        raise ValueError(f"expected queries of width {cfg.d}, got {Q.shape}")
    A = softmax(Q @ F.T / math.sqrt(cfg.d))
    return A, A @ F


@dataclass
class Forward:
    cfg: DecoderConfig
    F: np.ndarray
    classes: np.ndarray
    perm: np.ndarray
    n: int
    parallel_logits: np.ndarray  # (M, L), chain order
    cot_logits: np.ndarray  # (M, L), chain order
    cls_v_logits: np.ndarray  # (L, n_classes)
    cls_t_logits: np.ndarray  # (n, n_classes), mention order
    dist_logits: np.ndarray  # (L,)
    cross_attention: np.ndarray  # (M, L)
    cache: dict = field(repr=False, default_factory=dict)


def decode_chain(cfg: DecoderConfig, F: np.ndarray, mention_classes: Sequence[int],
                 order: Sequence[int], params: DecoderParams) -> Forward:
    """Full forward pass; ``order`` is the pathway permutation of mention indices."""
    _check_features(F, cfg)
    classes = np.asarray(mention_classes, dtype=int)
    n = len(classes)
    if not 1 <= n <= cfg.M:
        raise CapacityError(f"need between 1 and {cfg.M} mentions, got {n}")
    if len(order) != n:
        raise ValueError("order length must equal the number of mentions")
    E = order_embedding(order, cfg)
    perm = np.array(list(order) + list(range(n, cfg.M)), dtype=int)

    par = _parallel(F, classes, params, cfg)
    RF = par["RF"]
    X0 = (RF + E)[perm]
    S, att = _mhsa(X0, params, cfg, attention_mask(cfg, n))
    X1 = X0 + S
    A = softmax(X1 @ F.T / math.sqrt(cfg.d))
    Y = X1 + A @ F
    return Forward(
        cfg=cfg,
        F=F,
        classes=classes,
        perm=perm,
        n=n,
        parallel_logits=RF[perm] @ F.T,
        cot_logits=Y @ params.w_head @ F.T,
        cls_v_logits=F @ params.w_cls_v,
        cls_t_logits=RF[:n] @ params.w_cls_t,
        dist_logits=F @ params.w_dist,
        cross_attention=A,
        cache={**par, "X0": X0, "X1": X1, "Y": Y, "att": att},
    )


# -- losses ----------------------------------------------------------------


@dataclass(frozen=True)
class Targets:
    gold: np.ndarray  # (n,) gold proposal row per mention, mention order
    proposal_classes: np.ndarray  # (L,)

    def distractors(self, fwd: Forward, target_mention: int) -> np.ndarray:
        target_row = self.gold[target_mention]
        target_class = fwd.classes[target_mention]
        y = (self.proposal_classes == target_class).astype(float)
        y[target_row] = 0.0
        return y


def _ce(logits: np.ndarray, gold: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cross-entropy and softmax."""
    p = softmax(logits)
    m = np.max(logits, axis=-1)
    lse = m + np.log(np.sum(np.exp(logits - m[:, None]), axis=-1))
    return lse - logits[np.arange(len(gold)), gold], p


def _bce(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _position_weights(cfg: DecoderConfig, n: int) -> np.ndarray:
    w = np.ones(n) if cfg.anchor_loss_enabled else np.zeros(n)
    w[n - 1] = 1.0  # the target always sits last
    return w


def _validate_targets(fwd: Forward, targets: Targets) -> None:
    L = fwd.F.shape[0]
    gold = np.asarray(targets.gold)
    if gold.shape != (fwd.n,):
        raise ValueError(f"expected {fwd.n} gold indices, got shape {gold.shape}")
    if np.any(gold < 0) or np.any(gold >= L):
        raise ValueError(f"gold proposal index out of range [0, {L})")
    if np.asarray(targets.proposal_classes).shape != (L,):
        raise ValueError("need one class per proposal")


def _loss_parts(fwd: Forward, targets: Targets):
    cfg, n, L = fwd.cfg, fwd.n, fwd.F.shape[0]
    _validate_targets(fwd, targets)
    target_mention = fwd.perm[n - 1]
    gold_chain = np.asarray(targets.gold)[fwd.perm[:n]]
    w = _position_weights(cfg, n)

    ce_p, p_p = _ce(fwd.parallel_logits[:n], gold_chain)
    ce_c, p_c = _ce(fwd.cot_logits[:n], gold_chain)
    terms_p = w * ce_p / n
    terms_c = w * ce_c / n
    ce_v, p_v = _ce(fwd.cls_v_logits, np.asarray(targets.proposal_classes))
    ce_t, p_t = _ce(fwd.cls_t_logits, fwd.classes)
    y = targets.distractors(fwd, target_mention)
    bce = _bce(fwd.dist_logits, y)
    parts = dict(
        l_cls_V=float(np.mean(ce_v)),
        l_cls_T=float(np.mean(ce_t)),
        l_ref_P=float(np.sum(terms_p)),
        l_ref_COT=float(np.sum(terms_c)),
        l_dist=float(np.mean(bce)),
    )
    bundle = LossBundle(
        **parts,
        total=combine_losses(cfg, parts["l_cls_V"], parts["l_cls_T"], parts["l_ref_P"],
                             parts["l_ref_COT"], parts["l_dist"]),
        ref_p_terms=tuple(float(t) for t in terms_p),
        ref_cot_terms=tuple(float(t) for t in terms_c),
    )
    aux = dict(gold_chain=gold_chain, w=w, p_p=p_p, p_c=p_c, p_v=p_v, p_t=p_t, y=y, L=L)
    return bundle, aux


def total_loss(fwd: Forward, targets: Targets) -> LossBundle:
    return _loss_parts(fwd, targets)[0]


def _onehot(idx: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(idx), width))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def backward(fwd: Forward, targets: Targets, params: DecoderParams) -> tuple[LossBundle, DecoderParams]:
    """Loss bundle and gradients of ``total`` with respect to every parameter."""
    bundle, aux = _loss_parts(fwd, targets)
    cfg, n, F, c = fwd.cfg, fwd.n, fwd.F, fwd.cache
    M, L, d = cfg.M, F.shape[0], cfg.d
    sq = math.sqrt(d)
    g = params.zeros_like()

    # logit gradients
    scale = (cfg.lambda_ref * aux["w"] / n)[:, None]
    d_plog = np.zeros((M, L))
    d_plog[:n] = scale * (aux["p_p"] - _onehot(aux["gold_chain"], L))
    d_clog = np.zeros((M, L))
    d_clog[:n] = scale * (aux["p_c"] - _onehot(aux["gold_chain"], L))
    n_cls = params.class_queries.shape[0]
    d_vlog = cfg.lambda_v / L * (aux["p_v"] - _onehot(np.asarray(targets.proposal_classes), n_cls))
    d_tlog = cfg.lambda_t / n * (aux["p_t"] - _onehot(fwd.classes, n_cls))
    d_dlog = cfg.lambda_dist / L * (_sigmoid(fwd.dist_logits) - aux["y"])

    # CoT head: C = Y W_h F^T
    dCF = d_clog @ F
    g.w_head = c["Y"].T @ dCF
    dY = dCF @ params.w_head.T
    # Y = X1 + A F,  A = softmax(X1 F^T / sqrt d)
    A = fwd.cross_attention
    dX1 = dY.copy()
    dZ = _softmax_backward(A, dY @ F.T)
    dX1 += dZ @ F / sq
    # X1 = X0 + MHSA(X0)
    dX0 = dX1.copy()
    att = c["att"]
    h, dh = cfg.heads, d // cfg.heads
    g.wo = att["O"].T @ dX1
    dO = (dX1 @ params.wo.T).reshape(M, h, dh).transpose(1, 0, 2)
    dAtt = dO @ att["V"].transpose(0, 2, 1)
    dV = att["A"].transpose(0, 2, 1) @ dO
    dS = _softmax_backward(att["A"], dAtt) / math.sqrt(dh)
    dQ = dS @ att["K"]
    dK = dS.transpose(0, 2, 1) @ att["Q"]

    def merge(x):
        return x.transpose(1, 0, 2).reshape(M, d)

    dQ, dK, dV = merge(dQ), merge(dK), merge(dV)
    X0 = c["X0"]
    g.wq, g.wk, g.wv = X0.T @ dQ, X0.T @ dK, X0.T @ dV
    dX0 += dQ @ params.wq.T + dK @ params.wk.T + dV @ params.wv.T

    # back to mention order: X0 = (RF + E)[perm], parallel logits = RF[perm] F^T
    dRF = np.zeros((M, d))
    dRF[fwd.perm] += dX0 + d_plog @ F
    RF = c["RF"]
    g.w_cls_t = RF[:n].T @ d_tlog
    dRF[:n] += d_tlog @ params.w_cls_t.T
    # RF[:n] = pool W_r, pool = alpha F, alpha = softmax(Q_c F^T / sqrt d)
    g.w_readout = c["pool"].T @ dRF[:n]
    dpool = dRF[:n] @ params.w_readout.T
    dlogit = _softmax_backward(c["alpha"], dpool @ F.T)
    np.add.at(g.class_queries, fwd.classes, dlogit @ F / sq)

    g.w_cls_v = F.T @ d_vlog
    g.w_dist = F.T @ d_dlog
    return bundle, g


# -- synthetic instances and gradient verification -------------------------


@dataclass
class ToyInstance:
    cfg: DecoderConfig
    F: np.ndarray
    classes: np.ndarray
    order: list[int]
    targets: Targets
    params: DecoderParams


def toy_instance(cfg: DecoderConfig, seed: int, n_classes: int = 5, n_mentions: int | None = None) -> ToyInstance:
    """Seeded random features, parse stand-in, targets and parameters."""
    rng = np.random.default_rng(seed)
    n = n_mentions if n_mentions is not None else cfg.M
    if not 1 <= n <= cfg.M:
        raise CapacityError(f"n_mentions must be in [1, {cfg.M}]")
    F = rng.normal(0, 1, (cfg.L, cfg.d))
    classes = rng.integers(0, n_classes, n)
    order = [int(i) for i in rng.permutation(n)]
    gold = rng.integers(0, cfg.L, n)
    prop_classes = rng.integers(0, n_classes, cfg.L)
    prop_classes[gold] = classes  # gold proposals carry their mention's class
    params = DecoderParams.init(cfg, n_classes, rng)
    return ToyInstance(cfg, F, classes, order, Targets(gold, prop_classes), params)


def loss_of(inst: ToyInstance, params: DecoderParams | None = None) -> LossBundle:
    p = params if params is not None else inst.params
    fwd = decode_chain(inst.cfg, inst.F, inst.classes, inst.order, p)
    return total_loss(fwd, inst.targets)


def analytic_grads(inst: ToyInstance) -> tuple[LossBundle, DecoderParams]:
    fwd = decode_chain(inst.cfg, inst.F, inst.classes, inst.order, inst.params)
    return backward(fwd, inst.targets, inst.params)


def numeric_grads(inst: ToyInstance, step: float = 1e-5) -> DecoderParams:
    """Central finite differences of ``total`` for every parameter entry."""
    g = inst.params.zeros_like()
    for name, arr in inst.params.arrays().items():
        out = getattr(g, name)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = loss_of(inst).total
            flat[i] = old - step
            down = loss_of(inst).total
            flat[i] = old
            out.reshape(-1)[i] = (up - down) / (2 * step)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / (||a|| + ||b||), 0 when both vanish."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def grad_check(cfg: DecoderConfig, seed: int, step: float = 1e-5) -> float:
    """Largest per-tensor relative error between analytic and finite-difference gradients."""
    if cfg.d > 16 or cfg.M > 4 or cfg.L > 8:
        raise ValueError("grad_check is meant for toy sizes (d <= 16, M <= 4, L <= 8)")
    inst = toy_instance(cfg, seed)
    _, ga = analytic_grads(inst)
    gn = numeric_grads(inst, step)
    return max(relative_error(ga.arrays()[k], gn.arrays()[k]) for k in ga.names())
