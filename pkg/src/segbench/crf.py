"""Order-k linear-chain CRF segmenter.

Words are tagged with {B, M, E, S} inside a START/END frame under the
grammar START>{B,S}, B>{M,E}, M>{M,E}, E>{B,S,END}, S>{B,S,END}; morph
boundaries close after E and S, so any grammar-valid path rebuilds the
surface exactly.

Scores are linear: substring features around each position conjoined with
the current label, plus transition indicator weights over grammar-valid
label windows of every order 1..k. A window only exists where it fits
inside the frame (at most one leading START); the weight table simply has
no entry for deeper padding, which keeps positions near the word start
consistent between scoring, inference, and the gradient.

Inference runs over states that are label histories of length max(1, k),
START-padded on the left. Exact forward-backward and Viterbi stay cheap
because the grammar admits few histories (46 states at k=4).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus import Word

logger = logging.getLogger(__name__)

BOUND_LEFT = "⟨w⟩"
BOUND_RIGHT = "⟨/w⟩"
START = "START"
END = "END"
LABELS = ("B", "M", "E", "S")  # canonical order, also the Viterbi tie-break
_LABEL_INDEX = {lab: i for i, lab in enumerate(LABELS)}
SUCCESSORS: dict[str, tuple[str, ...]] = {
    START: ("B", "S"),
    "B": ("M", "E"),
    "M": ("M", "E"),
    "E": ("B", "S", END),
    "S": ("B", "S", END),
}


def extract_features(surface: str, t: int, delta: int = 4) -> tuple[str, ...]:
    """Substring features around position t, sentinel-framed.

    Left substrings end at t-1, right substrings start at t, lengths 1..delta
    on each side, truncated to what fits inside the framed word. The
    sentinels count as single symbols, and the side/length tag makes a
    sentinel-bearing substring unambiguous even if a surface contains the
    sentinel characters literally.
    """
    n = len(surface)
    if not 0 <= t < n:
        raise IndexError(f"position {t} outside surface of length {n}")
    framed = [BOUND_LEFT, *surface, BOUND_RIGHT]
    ft = t + 1
    feats = []
    for length in range(1, min(delta, ft) + 1):
        feats.append(f"L{length}={''.join(framed[ft - length:ft])}")
    for length in range(1, min(delta, n + 2 - ft) + 1):
        feats.append(f"R{length}={''.join(framed[ft:ft + length])}")
    return tuple(feats)


def label_word(word: Word) -> tuple[str, ...]:
    """Gold label sequence for a segmented word, framed by START/END."""
    labels = [START]
    for morph in word.morphs:
        if len(morph) == 1:
            labels.append("S")
        else:
            labels.append("B")
            labels.extend("M" * (len(morph) - 2))
            labels.append("E")
    labels.append(END)
    return tuple(labels)


def labels_to_morphs(surface: str, labels: Sequence[str]) -> tuple[str, ...]:
    """Cut the surface after every E and S label."""
    if len(labels) != len(surface):
        raise ValueError("need one interior label per character")
    morphs, start = [], 0
    for i, lab in enumerate(labels):
        if lab in ("E", "S"):
            morphs.append(surface[start:i + 1])
            start = i + 1
    if start != len(surface):  # only reachable on grammar-violating input
        morphs.append(surface[start:])
    return tuple(morphs)


def transition_vocabulary(k: int) -> tuple[tuple[str, ...], ...]:
    """All grammar-valid label windows (history, target) of orders 1..k.

    START may appear only window-initially and END only window-finally.
    Windows that would need deeper START padding are deliberately absent:
    inference treats missing windows as zero weight.
    """
    windows: list[tuple[str, ...]] = []
    for order in range(1, k + 1):
        seqs: list[tuple[str, ...]] = [(lab,) for lab in (START,) + LABELS]
        for step in range(order):
            last = step == order - 1
            grown = []
            for seq in seqs:
                for succ in SUCCESSORS[seq[-1]]:
                    if succ == END and not last:
                        continue
                    grown.append(seq + (succ,))
            seqs = grown
        windows.extend(seqs)
    return tuple(windows)


# --------------------------------------------------------------------------
# State space: label histories of length c = max(1, k), START-padded


@dataclass(frozen=True, eq=False)
class _StateSpace:
    c: int
    states: tuple[tuple[str, ...], ...]
    label_idx: np.ndarray        # (S,) index into LABELS of the newest label
    label_onehot: np.ndarray     # (S, 4) scatter matrix for marginals
    init_idx: np.ndarray         # states legal at t=0, ordered B before S
    pairs_src: np.ndarray        # valid consecutive state pairs
    pairs_dst: np.ndarray
    succ: tuple[tuple[int, ...], ...]  # per state, successors in label order
    final_mask: np.ndarray       # (S,) states allowed to close the word


@lru_cache(maxsize=None)
def _state_space(c: int) -> _StateSpace:
    states: list[tuple[str, ...]] = []
    for pad in range(c - 1, -1, -1):
        if pad >= 1:
            seqs = [(START,) * pad + (lab,) for lab in SUCCESSORS[START]]
        else:
            seqs = [(lab,) for lab in LABELS]
        for _ in range(c - pad - 1):
            seqs = [
                s + (succ,)
                for s in seqs
                for succ in SUCCESSORS[s[-1]]
                if succ != END
            ]
        states.extend(seqs)
    index = {s: i for i, s in enumerate(states)}
    n_states = len(states)
    label_idx = np.array([_LABEL_INDEX[s[-1]] for s in states], dtype=np.intp)
    onehot = np.zeros((n_states, len(LABELS)))
    onehot[np.arange(n_states), label_idx] = 1.0

    src, dst = [], []
    succ_lists: list[list[int]] = [[] for _ in range(n_states)]
    for i, a in enumerate(states):
        for j, b in enumerate(states):
            if a[1:] == b[:-1] and b[-1] in SUCCESSORS[a[-1]]:
                src.append(i)
                dst.append(j)
                succ_lists[i].append(j)
    for lst in succ_lists:
        lst.sort(key=lambda j: label_idx[j])

    init = [
        i
        for i, s in enumerate(states)
        if s[:-1] == (START,) * (c - 1) and s[-1] in SUCCESSORS[START]
    ]
    init.sort(key=lambda i: label_idx[i])
    final = np.array([END in SUCCESSORS[s[-1]] for s in states])
    return _StateSpace(
        c=c,
        states=tuple(states),
        label_idx=label_idx,
        label_onehot=onehot,
        init_idx=np.array(init, dtype=np.intp),
        pairs_src=np.array(src, dtype=np.intp),
        pairs_dst=np.array(dst, dtype=np.intp),
        succ=tuple(tuple(lst) for lst in succ_lists),
        final_mask=final,
    )


@dataclass(frozen=True, eq=False)
class _Wiring:
    """Window ids wired onto the state space for one order k.

    Absent windows (deeper padding than the frame allows) point at a
    sentinel slot holding weight zero, so dense table construction and
    gradient scatter need no branching.
    """

    space: _StateSpace
    n_windows: int
    init_windows: np.ndarray   # (n_init, min(k,1))
    pair_windows: np.ndarray   # (n_pairs, k)
    final_windows: np.ndarray  # (S, k)


@lru_cache(maxsize=None)
def _wiring(k: int) -> _Wiring:
    space = _state_space(max(1, k))
    vocab = {w: i for i, w in enumerate(transition_vocabulary(k))}
    sentinel = len(vocab)

    def ids(history: tuple[str, ...], target: str) -> list[int]:
        out = []
        for order in range(1, k + 1):
            window = history[len(history) - order:] + (target,)
            out.append(vocab.get(window, sentinel))
        return out

    # At t=0 only the order-1 window (START, y0) fits the frame.
    if k >= 1:
        init_windows = np.array(
            [[vocab[(START, space.states[i][-1])]] for i in space.init_idx],
            dtype=np.intp,
        )
    else:
        init_windows = np.zeros((len(space.init_idx), 0), dtype=np.intp)
    pair_windows = np.array(
        [
            ids(space.states[i], space.states[j][-1])
            for i, j in zip(space.pairs_src, space.pairs_dst)
        ],
        dtype=np.intp,
    ).reshape(len(space.pairs_src), k)
    final_windows = np.array(
        [
            ids(s, END) if space.final_mask[idx] else [sentinel] * k
            for idx, s in enumerate(space.states)
        ],
        dtype=np.intp,
    ).reshape(len(space.states), k)
    return _Wiring(
        space=space,
        n_windows=len(vocab),
        init_windows=init_windows,
        pair_windows=pair_windows,
        final_windows=final_windows,
    )


def _dense_tables(wiring: _Wiring, trans_w: np.ndarray):
    """(T, init, final) log-score tables; invalid entries are -inf."""
    space = wiring.space
    n_states = len(space.states)
    ext = np.append(trans_w, 0.0)
    T = np.full((n_states, n_states), -np.inf)
    T[space.pairs_src, space.pairs_dst] = ext[wiring.pair_windows].sum(axis=1)
    init = np.full(n_states, -np.inf)
    init[space.init_idx] = ext[wiring.init_windows].sum(axis=1)
    final = np.full(n_states, -np.inf)
    final[space.final_mask] = ext[wiring.final_windows[space.final_mask]].sum(axis=1)
    return T, init, final


# --------------------------------------------------------------------------
# Model


@dataclass(frozen=True, eq=False)
class CrfModel:
    k: int
    delta: int
    l2: float
    features: dict[str, int]
    emission: np.ndarray                      # (n_features, 4)
    transitions: dict[tuple[str, ...], int]
    trans_weights: np.ndarray                 # (n_windows,)

    def __post_init__(self) -> None:
        if not 0 <= self.k:
            raise ValueError("order k must be nonnegative")
        if self.emission.shape != (len(self.features), len(LABELS)):
            raise ValueError("emission weight shape mismatch")
        if self.trans_weights.shape != (len(self.transitions),):
            raise ValueError("transition weight shape mismatch")

    def weight_vector(self) -> np.ndarray:
        return np.concatenate([self.emission.ravel(), self.trans_weights])

    def with_weights(self, vec: np.ndarray) -> "CrfModel":
        n_emis = self.emission.size
        return CrfModel(
            k=self.k,
            delta=self.delta,
            l2=self.l2,
            features=self.features,
            emission=np.asarray(vec[:n_emis], dtype=float).reshape(self.emission.shape).copy(),
            transitions=self.transitions,
            trans_weights=np.asarray(vec[n_emis:], dtype=float).copy(),
        )

    def segment(self, surface: str) -> tuple[str, ...]:
        return viterbi_segment(self, surface)


def _feature_ids(
    features: Mapping[str, int], surface: str, delta: int
) -> list[list[int]]:
    """Known-feature ids per position; unseen features are dropped."""
    out = []
    for t in range(len(surface)):
        ids = []
        for f in extract_features(surface, t, delta):
            j = features.get(f)
            if j is not None:
                ids.append(j)
        out.append(ids)
    return out


def _emission_scores(model: CrfModel, surface: str) -> np.ndarray:
    """(n, 4) emission score per position and interior label."""
    scores = np.zeros((len(surface), len(LABELS)))
    for t, ids in enumerate(_feature_ids(model.features, surface, model.delta)):
        if ids:
            scores[t] = model.emission[ids].sum(axis=0)
    return scores


def path_score(model: CrfModel, surface: str, labels: Sequence[str]) -> float:
    """Direct score of one interior label sequence (no DP involved).

    Deliberately independent of the forward-backward machinery so
    enumeration-based checks exercise a second code path.
    """
    if len(labels) != len(surface):
        raise ValueError("need one interior label per character")
    framed = (START, *labels, END)
    score = 0.0
    for t, lab in enumerate(labels):
        li = _LABEL_INDEX[lab]
        for f in extract_features(surface, t, model.delta):
            j = model.features.get(f)
            if j is not None:
                score += float(model.emission[j, li])
    for t in range(len(labels) + 1):
        for order in range(1, model.k + 1):
            if t - order >= -1:
                window = framed[t - order + 1:t + 2]
                idx = model.transitions.get(window)
                if idx is not None:
                    score += float(model.trans_weights[idx])
    return score


def log_partition(model: CrfModel, surface: str) -> float:
    """Log sum of exp(score) over all grammar-valid label paths."""
    wiring = _wiring(model.k)
    space = wiring.space
    T, init, final = _dense_tables(wiring, model.trans_weights)
    e_lab = _emission_scores(model, surface)
    e_state = e_lab[:, space.label_idx]
    alpha = init + e_state[0]
    for t in range(1, len(surface)):
        alpha = logsumexp(alpha[:, None] + T, axis=0) + e_state[t]
    return float(logsumexp(alpha + final))


def viterbi_labels(model: CrfModel, surface: str) -> tuple[str, ...]:
    """Highest-scoring interior label path; ties prefer B over M, E, S
    position by position from the left."""
    if not surface:
        raise ValueError("cannot segment an empty surface")
    wiring = _wiring(model.k)
    space = wiring.space
    T, init, final = _dense_tables(wiring, model.trans_weights)
    e_lab = _emission_scores(model, surface)
    e_state = e_lab[:, space.label_idx]
    n = len(surface)
    n_states = len(space.states)

    ahead = np.empty((n, n_states))
    ahead[n - 1] = final
    for t in range(n - 1, 0, -1):
        ahead[t - 1] = np.max(T + (e_state[t] + ahead[t])[None, :], axis=1)

    def pick(candidates: Iterable[int], score_of) -> int:
        best, best_score = -1, -np.inf
        for s in candidates:  # candidates come ordered by label, so first max wins ties
            sc = score_of(s)
            if sc > best_score:
                best, best_score = s, sc
        if best < 0:
            raise RuntimeError("no admissible label path")
        return best

    cur = pick(space.init_idx, lambda s: init[s] + e_state[0, s] + ahead[0, s])
    labels = [LABELS[space.label_idx[cur]]]
    for t in range(1, n):
        cur = pick(space.succ[cur], lambda s: T[cur, s] + e_state[t, s] + ahead[t, s])
        labels.append(LABELS[space.label_idx[cur]])
    return tuple(labels)


def viterbi_segment(model: CrfModel, surface: str) -> tuple[str, ...]:
    return labels_to_morphs(surface, viterbi_labels(model, surface))


# --------------------------------------------------------------------------
# Training


def _build_feature_vocab(words: Sequence[Word], delta: int) -> dict[str, int]:
    features: dict[str, int] = {}
    for word in words:
        for t in range(len(word.surface)):
            for f in extract_features(word.surface, t, delta):
                if f not in features:
                    features[f] = len(features)
    return features


class _Objective:
    """Regularized NLL and gradient over a fixed batch, as a function of
    the flat weight vector [emission.ravel(), transitions].

    Words are grouped by length so forward-backward runs as dense batched
    matrix work; all reductions keep a fixed order, making the value and
    gradient bit-reproducible.
    """

    def __init__(
        self,
        words: Sequence[Word],
        features: Mapping[str, int],
        transitions: Mapping[tuple[str, ...], int],
        k: int,
        delta: int,
        l2: float,
    ):
        self.k = k
        self.l2 = l2
        self.n_feat = len(features)
        self.n_trans = len(transitions)
        self.n_params = self.n_feat * len(LABELS) + self.n_trans
        self.wiring = _wiring(k)

        by_len: dict[int, list[Word]] = {}
        for w in words:
            by_len.setdefault(len(w.surface), []).append(w)

        # Per length group: sentinel-padded feature-id matrices per position.
        self.groups: list[tuple[int, list[np.ndarray]]] = []
        sentinel = self.n_feat
        for n in sorted(by_len):
            group = by_len[n]
            ids_per_word = [_feature_ids(features, w.surface, delta) for w in group]
            per_t: list[np.ndarray] = []
            for t in range(n):
                rows = [ids[t] for ids in ids_per_word]
                width = max((len(r) for r in rows), default=0)
                mat = np.full((len(group), max(width, 1)), sentinel, dtype=np.intp)
                for i, r in enumerate(rows):
                    mat[i, :len(r)] = r
                per_t.append(mat)
            self.groups.append((n, per_t))

        self.empirical = np.zeros(self.n_params)
        base = self.n_feat * len(LABELS)
        for n in sorted(by_len):
            for w in by_len[n]:
                framed = label_word(w)
                interior = framed[1:-1]
                ids = _feature_ids(features, w.surface, delta)
                for t, lab in enumerate(interior):
                    li = _LABEL_INDEX[lab]
                    for j in ids[t]:
                        self.empirical[j * len(LABELS) + li] += 1.0
                for t in range(len(interior) + 1):
                    for order in range(1, k + 1):
                        if t - order >= -1:
                            window = framed[t - order + 1:t + 2]
                            self.empirical[base + transitions[window]] += 1.0

    def __call__(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.asarray(w, dtype=float)
        n_lab = len(LABELS)
        w_emis = w[: self.n_feat * n_lab].reshape(self.n_feat, n_lab)
        w_trans = w[self.n_feat * n_lab:]
        w_emis_ext = np.vstack([w_emis, np.zeros((1, n_lab))])

        wiring = self.wiring
        space = wiring.space
        T, init, final = _dense_tables(wiring, w_trans)
        src, dst = space.pairs_src, space.pairs_dst

        g_emis = np.zeros((self.n_feat + 1, n_lab))
        g_trans = np.zeros(self.n_trans + 1)
        loss = 0.0

        for n, per_t in self.groups:
            e_state = []
            for t in range(n):
                e_lab_t = w_emis_ext[per_t[t]].sum(axis=1)       # (W, 4)
                e_state.append(e_lab_t[:, space.label_idx])      # (W, S)

            alpha = np.empty((n, *e_state[0].shape))
            alpha[0] = init[None, :] + e_state[0]
            for t in range(1, n):
                alpha[t] = logsumexp(alpha[t - 1][:, :, None] + T[None], axis=1) + e_state[t]
            log_z = logsumexp(alpha[n - 1] + final[None, :], axis=1)  # (W,)
            loss += float(log_z.sum())

            beta = np.empty_like(alpha)
            beta[n - 1] = final[None, :]
            for t in range(n - 1, 0, -1):
                beta[t - 1] = logsumexp(T[None] + (e_state[t] + beta[t])[:, None, :], axis=2)

            for t in range(n):
                gamma = np.exp(alpha[t] + beta[t] - log_z[:, None])  # (W, S)
                gamma_lab = gamma @ space.label_onehot               # (W, 4)
                width = per_t[t].shape[1]
                np.add.at(
                    g_emis,
                    per_t[t].ravel(),
                    np.repeat(gamma_lab, width, axis=0),
                )
                if t == 0 and self.k >= 1:
                    init_mass = gamma[:, space.init_idx].sum(axis=0)
                    np.add.at(
                        g_trans,
                        wiring.init_windows.ravel(),
                        np.repeat(init_mass, wiring.init_windows.shape[1]),
                    )

            if self.k >= 1:
                pair_mass = np.zeros(len(src))
                for t in range(1, n):
                    xi = np.exp(
                        alpha[t - 1][:, :, None]
                        + T[None]
                        + (e_state[t] + beta[t])[:, None, :]
                        - log_z[:, None, None]
                    )
                    pair_mass += xi[:, src, dst].sum(axis=0)
                np.add.at(
                    g_trans,
                    wiring.pair_windows.ravel(),
                    np.repeat(pair_mass, self.k),
                )
                fin_mass = np.exp(alpha[n - 1] + final[None, :] - log_z[:, None]).sum(axis=0)
                np.add.at(
                    g_trans,
                    wiring.final_windows.ravel(),
                    np.repeat(fin_mass, self.k),
                )

        expect = np.concatenate([g_emis[: self.n_feat].ravel(), g_trans[: self.n_trans]])
        loss += -float(w @ self.empirical) + self.l2 * float(w @ w)
        grad = expect - self.empirical + 2.0 * self.l2 * w
        return loss, grad


def nll_and_gradient(model: CrfModel, batch: Sequence[Word]) -> tuple[float, np.ndarray]:
    """Regularized NLL of the batch and its gradient at the model's weights.

    Gradient layout matches CrfModel.weight_vector(): emission rows first
    (one block of 4 per feature), then transition windows.
    """
    vocab = {w: i for i, w in enumerate(transition_vocabulary(model.k))}
    obj = _Objective(batch, model.features, vocab, model.k, model.delta, model.l2)
    return obj(model.weight_vector())


def train_crf(
    train: Sequence[Word],
    k: int = 1,
    delta: int = 4,
    l2: float = 1.0,
    max_iter: int = 200,
    memory: int = 10,
    f_rel_tol: float = 1e-5,
    g_inf_tol: float = 1e-4,
    seed: int = 0,
) -> CrfModel:
    """Fit an order-k CRF by L-BFGS from zero initial weights.

    seed is accepted for segmenter-API uniformity; training is
    deterministic and never consumes it. Non-convergence within max_iter
    logs a warning with the final gradient norm and still returns the
    model.
    """
    del seed
    words = list(train)
    if not words:
        raise ValueError("training multiset is empty")
    features = _build_feature_vocab(words, delta)
    vocab = {w: i for i, w in enumerate(transition_vocabulary(k))}
    objective = _Objective(words, features, vocab, k, delta, l2)
    result = minimize(
        objective,
        np.zeros(objective.n_params),
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": max_iter,
            "maxcor": memory,
            "ftol": f_rel_tol,
            "gtol": g_inf_tol,
        },
    )
    if not result.success:
        logger.warning(
            "L-BFGS stopped without convergence (%s); gradient inf-norm %.3g",
            result.message,
            float(np.abs(result.jac).max()),
        )
    n_lab = len(LABELS)
    return CrfModel(
        k=k,
        delta=delta,
        l2=l2,
        features=features,
        emission=np.asarray(result.x[: len(features) * n_lab]).reshape(len(features), n_lab).copy(),
        transitions=vocab,
        trans_weights=np.asarray(result.x[len(features) * n_lab:]).copy(),
    )


# --------------------------------------------------------------------------
# Serialization: JSON keeps feature strings intact and floats round-trip
# through repr exactly.


def save_crf(model: CrfModel, path) -> None:
    payload = {
        "format": "segbench-crf",
        "version": 1,
        "k": model.k,
        "delta": model.delta,
        "l2": model.l2,
        "features": list(model.features),
        "emission": [[float(v) for v in row] for row in model.emission],
        "transitions": [">".join(w) for w in model.transitions],
        "trans_weights": [float(v) for v in model.trans_weights],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_crf(path) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "segbench-crf" or payload.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 model file")
    features = {f: i for i, f in enumerate(payload["features"])}
    transitions = {tuple(s.split(">")): i for i, s in enumerate(payload["transitions"])}
    return CrfModel(
        k=payload["k"],
        delta=payload["delta"],
        l2=payload["l2"],
        features=features,
        emission=np.array(payload["emission"], dtype=float).reshape(len(features), len(LABELS)),
        transitions=transitions,
        trans_weights=np.array(payload["trans_weights"], dtype=float),
    )
