"""Selector-gated fusion of the seen, unseen and joint classifiers.

Every operation accepts a single point (score vectors of shape ``(k,)``, scalar
selector score) or a batch (``(n, k)`` scores, ``(n,)`` selector scores).
Outputs always live on the full catalog ``C = C_s ++ C_u``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .classifiers import LinearModel, SelectorModel, score_linear, selector_score
from .dataset import ClassCatalog

NEG_INF = -np.inf


class FusionConfigError(ValueError):
    pass


class Strategy(str, enum.Enum):
    TWO_WAY = "2way"
    TWO_WAY_SA = "2way-sa"
    THREE_WAY = "3way"


@dataclass(frozen=True)
class FusionConfig:
    """Fusion strategy and its knobs.

    ``sigma`` is the sigmoid slope of the soft assignment, ``c`` the weight of
    the joint classifier inside the 3-way correction and ``o_s``/``o_u`` the
    offsets subtracted from the seen/unseen branch. Knobs the strategy does
    not use are carried along untouched. ``raw_mix`` makes the soft assignment
    mix raw logits instead of per-branch softmax posteriors.
    """

    strategy: Strategy = Strategy.TWO_WAY
    sigma: float = 1.0
    c: float = 1.0
    o_s: float = 0.0
    o_u: float = 0.0
    raw_mix: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not self.sigma > 0:
            raise FusionConfigError("sigma must be > 0")
        if not self.c >= 0:
            raise FusionConfigError("c must be >= 0")
        if np.isnan(self.o_s) or np.isnan(self.o_u):
            raise FusionConfigError("offsets must not be NaN")


@dataclass(frozen=True)
class FusedScores:
    class_ids: tuple[int, ...]
    values: np.ndarray  # (|C|,) or (n, |C|)
    branch: object  # "seen" / "unseen" / "mixed", or an array of those per point

    @property
    def prediction(self):
        """Arg-max class id; ties go to the lowest catalog position."""
        ids = np.asarray(self.class_ids)
        return ids[np.argmax(self.values, axis=-1)]


def embed_branch(scores, subset_ids, catalog: ClassCatalog, fill: float = NEG_INF) -> np.ndarray:
    """Place scores over ``subset_ids`` into a vector over the full catalog."""
    scores = np.asarray(scores, dtype=np.float64)
    positions = catalog.index_of(subset_ids)
    if scores.shape[-1] != positions.shape[0]:
        raise FusionConfigError("score length does not match subset size")
    out = np.full(scores.shape[:-1] + (len(catalog),), fill, dtype=np.float64)
    out[..., positions] = scores
    return out


def _branch_labels(s):
    return np.where(np.asarray(s) >= 0, "seen", "unseen")[()]


def fuse_2way(s, g_s, g_u, catalog: ClassCatalog) -> FusedScores:
    """Hard routing: seen scores when ``s >= 0``, unseen scores otherwise."""
    s = np.asarray(s, dtype=np.float64)
    seen = embed_branch(g_s, catalog.seen_ids, catalog)
    unseen = embed_branch(g_u, catalog.unseen_ids, catalog)
    values = np.where((s >= 0)[..., None], seen, unseen)
    return FusedScores(catalog.all_ids, values, _branch_labels(s))


def sigmoid_domain_prob(s, sigma: float):
    """Probability of the seen domain, ``1 / (1 + exp(-sigma * s))``."""
    if not sigma > 0:
        raise FusionConfigError("sigma must be > 0")
    z = sigma * np.asarray(s, dtype=np.float64)
    # evaluate exp only on non-positive arguments
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(p) if p.ndim == 0 else p


def _softmax(g):
    g = np.asarray(g, dtype=np.float64)
    e = np.exp(g - g.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def fuse_2way_sa(p_s, g_s, g_u, catalog: ClassCatalog, raw_mix: bool = False) -> FusedScores:
    """Soft assignment: ``p_s * g_s`` and ``(1 - p_s) * g_u`` side by side.

    By default each branch is softmax-normalized first so the result is a
    distribution over the catalog.
    """
    p_s = np.asarray(p_s, dtype=np.float64)
    if np.any((p_s < 0) | (p_s > 1)):
        raise FusionConfigError("p_s must lie in [0, 1]")
    if not raw_mix:
        g_s, g_u = _softmax(g_s), _softmax(g_u)
    seen = p_s[..., None] * np.asarray(g_s, dtype=np.float64)
    unseen = (1.0 - p_s)[..., None] * np.asarray(g_u, dtype=np.float64)
    values = embed_branch(seen, catalog.seen_ids, catalog, fill=0.0)
    values[..., catalog.index_of(catalog.unseen_ids)] = unseen
    branch = np.full(p_s.shape, "mixed")[()]
    return FusedScores(catalog.all_ids, values, branch)


def fuse_3way(s, g_s, g_u, g_t, cfg: FusionConfig, catalog: ClassCatalog) -> FusedScores:
    """Branch correction masked by the joint classifier.

    On the routed branch the candidate score is ``c * g_t + g_branch - o_branch``
    (``g_t`` restricted to the branch classes); the result is the elementwise
    max of that candidate (``-inf`` off-branch) and ``g_t``.
    """
    s = np.asarray(s, dtype=np.float64)
    g_t = np.asarray(g_t, dtype=np.float64)
    g_s = np.asarray(g_s, dtype=np.float64)
    g_u = np.asarray(g_u, dtype=np.float64)
    if g_t.shape[-1] != len(catalog):
        raise FusionConfigError(f"g_t must cover all {len(catalog)} catalog classes")
    if g_s.shape[-1] != catalog.n_seen or g_u.shape[-1] != catalog.n_unseen:
        raise FusionConfigError("branch score lengths do not match the catalog")

    seen_pos = catalog.index_of(catalog.seen_ids)
    unseen_pos = catalog.index_of(catalog.unseen_ids)
    # c == 0 must not turn -inf joint scores into NaN
    joint = np.zeros_like(g_t) if cfg.c == 0 else cfg.c * g_t
    cand_seen = np.full(g_t.shape, NEG_INF)
    cand_seen[..., seen_pos] = joint[..., seen_pos] + g_s - cfg.o_s
    cand_unseen = np.full(g_t.shape, NEG_INF)
    cand_unseen[..., unseen_pos] = joint[..., unseen_pos] + g_u - cfg.o_u
    candidate = np.where((s >= 0)[..., None], cand_seen, cand_unseen)
    candidate = np.nan_to_num(candidate, nan=NEG_INF, posinf=np.inf, neginf=NEG_INF)
    return FusedScores(catalog.all_ids, np.maximum(candidate, g_t), _branch_labels(s))


def scores_over(model: LinearModel, x, ids, fill: float = NEG_INF) -> np.ndarray:
    """Model scores rearranged onto ``ids``; ids the model lacks get ``fill``."""
    raw = score_linear(model, x)
    out = np.full(raw.shape[:-1] + (len(ids),), fill, dtype=np.float64)
    where = {c: i for i, c in enumerate(ids)}
    for j, c in enumerate(model.class_ids):
        if c not in where:
            raise FusionConfigError(f"model scores class {c} outside the expected set")
        out[..., where[c]] = raw[..., j]
    return out


def fuse_scores(s, g_s, g_u, g_t, cfg: FusionConfig, catalog: ClassCatalog) -> FusedScores:
    """Dispatch precomputed selector and classifier scores to ``cfg.strategy``."""
    if cfg.strategy is Strategy.TWO_WAY:
        return fuse_2way(s, g_s, g_u, catalog)
    if cfg.strategy is Strategy.TWO_WAY_SA:
        return fuse_2way_sa(sigmoid_domain_prob(s, cfg.sigma), g_s, g_u, catalog,
                            raw_mix=cfg.raw_mix)
    if g_t is None:
        raise FusionConfigError("3-way fusion needs the joint model")
    return fuse_3way(s, g_s, g_u, g_t, cfg, catalog)


def compute_scores(x, selector: SelectorModel, m_seen: LinearModel, m_unseen: LinearModel,
                   m_joint: LinearModel | None, catalog: ClassCatalog):
    """Selector score and per-model class scores on catalog order.

    Returns ``(s, g_s, g_u, g_t)``; ``g_t`` is None without a joint model and
    carries ``-inf`` for catalog classes the joint model does not score.
    """
    if set(m_seen.class_ids) != set(catalog.seen_ids):
        raise FusionConfigError("seen model must score exactly the seen classes")
    if set(m_unseen.class_ids) != set(catalog.unseen_ids):
        raise FusionConfigError("unseen model must score exactly the unseen classes")
    s = selector_score(selector, x)
    g_s = scores_over(m_seen, x, catalog.seen_ids)
    g_u = scores_over(m_unseen, x, catalog.unseen_ids)
    g_t = None if m_joint is None else scores_over(m_joint, x, catalog.all_ids)
    return s, g_s, g_u, g_t


def fuse(x, selector: SelectorModel, m_seen: LinearModel, m_unseen: LinearModel,
         m_joint: LinearModel | None, cfg: FusionConfig, catalog: ClassCatalog) -> FusedScores:
    """Score ``x`` (one point or a batch) with every model and apply ``cfg.strategy``."""
    if cfg.strategy is Strategy.THREE_WAY and m_joint is None:
        raise FusionConfigError("3-way fusion needs the joint model")
    scores = compute_scores(x, selector, m_seen, m_unseen, m_joint, catalog)
    return fuse_scores(*scores, cfg, catalog)
