"""Model-backed tasks: fill in missing cells, score held-out cells, and
summarize the feature patterns a fitted state assigns to rows."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from glfm.data import AttributeKind, AttributeSpec, DataMatrix, fit_transforms
from glfm.engine import ChainResult, Hyperparams, LatentState, run_chain
from glfm.likelihoods import (
    log_prob_count,
    log_prob_ordinal,
    loglik_continuous,
    map_forward,
    prob_categorical,
    prob_ordinal,
)
from glfm.randkit import RngState, spawn_seeds

__all__ = [
    "CompletionResult",
    "Pattern",
    "as_all_real",
    "complete",
    "compute_map",
    "compute_pdf",
    "extract_patterns",
    "feature_activation_probs",
    "heldout_benchmark",
    "impute_from_states",
    "make_heldout_masks",
    "predictive_loglik",
    "predictive_loglik_by_dim",
]

TINY_PROB = 1e-300


@dataclass
class CompletionResult:
    """Encoded cell values with missing entries imputed, plus the chain that
    produced them."""

    cells: np.ndarray
    chain: ChainResult


@dataclass(frozen=True)
class Pattern:
    """One observed feature-activation pattern (bias column included)."""

    bits: tuple[int, ...]
    count: int
    empirical_prob: float

    @property
    def label(self) -> str:
        return "(" + "".join(str(b) for b in self.bits) + ")"


def compute_map(z: np.ndarray, state: LatentState, d: int):
    """Most likely value of attribute d for a row with feature vector z.

    Returns an encoded value (category index, level, count, or transformed
    continuous value). Discrete ties resolve to the lowest value. For counts
    the search covers the neighbourhood of the density peak.
    """
    spec = state.specs[d]
    cs = state.dim_cols(d)
    m = np.asarray(z, dtype=float) @ state.B[:, cs]
    kind = spec.kind
    if kind.is_continuous:
        return float(map_forward(float(m[0]), spec, kind))
    if kind is AttributeKind.CATEGORICAL:
        return int(np.argmax(m) + 1)
    if kind is AttributeKind.ORDINAL:
        return int(map_forward(float(m[0]), spec, kind, theta=state.theta[d]))
    sd = math.sqrt(float(state.sigma2[d]))
    center = int(map_forward(float(m[0]), spec, kind))
    best_x, best_ll = None, -np.inf
    for x in range(max(0, center - 2), center + 3):
        ll = log_prob_count(x, float(m[0]), spec, sd)
        if ll > best_ll:
            best_x, best_ll = x, ll
    return int(best_x)


def _cell_loglik(state: LatentState, n: int, d: int, x: float) -> float:
    """Log predictive probability (or density) of encoded value x at cell
    (n, d) under one state."""
    spec = state.specs[d]
    cs = state.dim_cols(d)
    z = state.Z[n]
    m = z @ state.B[:, cs]
    var_d = float(state.sigma2[d])
    kind = spec.kind
    if kind.is_continuous:
        total_var = var_d + state.hp.sigma_u2
        return float(loglik_continuous(float(x), float(m[0]), total_var, spec, kind))
    sd = math.sqrt(var_d)
    if kind is AttributeKind.CATEGORICAL:
        p = prob_categorical(int(x), z, state.B[:, cs], sd)
        return math.log(max(p, TINY_PROB))
    if kind is AttributeKind.ORDINAL:
        return float(log_prob_ordinal(int(x), float(m[0]), state.theta[d], sd))
    return float(log_prob_count(int(x), float(m[0]), spec, sd))


def _impute_cell(states: list[LatentState], n: int, d: int):
    """Encoded completion of cell (n, d), averaging predictions over states."""
    if len(states) == 1:
        state = states[0]
        return compute_map(state.Z[n], state, d)
    spec = states[0].specs[d]
    kind = spec.kind
    if kind.is_continuous:
        vals = [
            float(map_forward(float((s.Z[n] @ s.B[:, s.dim_cols(d)])[0]), spec, kind))
            for s in states
        ]
        return float(np.mean(vals))
    if kind is AttributeKind.CATEGORICAL:
        R = spec.R_d
        probs = np.zeros(R)
        for s in states:
            cs = s.dim_cols(d)
            sd = math.sqrt(float(s.sigma2[d]))
            probs += [prob_categorical(r, s.Z[n], s.B[:, cs], sd) for r in range(1, R + 1)]
        return int(np.argmax(probs) + 1)
    if kind is AttributeKind.ORDINAL:
        R = spec.R_d
        probs = np.zeros(R)
        for s in states:
            m = float((s.Z[n] @ s.B[:, s.dim_cols(d)])[0])
            sd = math.sqrt(float(s.sigma2[d]))
            probs += [prob_ordinal(r, m, s.theta[d], sd) for r in range(1, R + 1)]
        return int(np.argmax(probs) + 1)
    candidates: set[int] = set()
    for s in states:
        center = int(map_forward(float((s.Z[n] @ s.B[:, s.dim_cols(d)])[0]), spec, kind))
        candidates.update(range(max(0, center - 2), center + 3))
    xs = sorted(candidates)
    probs = np.zeros(len(xs))
    for s in states:
        m = float((s.Z[n] @ s.B[:, s.dim_cols(d)])[0])
        sd = math.sqrt(float(s.sigma2[d]))
        probs += [math.exp(log_prob_count(x, m, spec, sd)) for x in xs]
    return int(xs[int(np.argmax(probs))])


def impute_from_states(states: list[LatentState], data: DataMatrix) -> np.ndarray:
    """Encoded cell matrix with every missing entry filled from the states."""
    filled = data.cells.copy()
    for d in range(data.n_cols):
        for n in np.flatnonzero(data.missing[:, d]):
            filled[n, d] = _impute_cell(states, int(n), d)
    return filled


def complete(
    data: DataMatrix,
    hp: Hyperparams,
    rng: RngState | None = None,
    average_last: int = 1,
) -> CompletionResult:
    """Fit a chain to `data` and impute every missing cell.

    Specs on `data` must already carry transform parameters (fit_transforms).
    average_last > 1 averages the predictive over that many trailing states.
    """
    if not data.missing.any():
        warnings.warn("no missing cells to complete", stacklevel=2)
    chain = run_chain(data, hp, rng=rng, keep_last=average_last)
    filled = impute_from_states(chain.saved, data)
    return CompletionResult(cells=filled, chain=chain)


def predictive_loglik(states: list[LatentState], data: DataMatrix, mask: np.ndarray) -> float:
    """Total log predictive of the encoded cells selected by `mask`,
    averaging per-cell probabilities over the given states."""
    mask = np.asarray(mask, dtype=bool)
    cells = np.argwhere(mask)
    if cells.size == 0:
        raise ValueError("mask selects no cells")
    total = 0.0
    S = len(states)
    for n, d in cells:
        lls = np.array(
            [_cell_loglik(s, int(n), int(d), data.cells[n, d]) for s in states]
        )
        top = lls.max()
        if np.isneginf(top):
            total += -np.inf
            continue
        total += float(top + np.log(np.mean(np.exp(lls - top))))
    return total


def predictive_loglik_by_dim(
    states: list[LatentState], data: DataMatrix, mask: np.ndarray
) -> dict[str, dict]:
    """Per-attribute breakdown of predictive_loglik: sum, cell count, mean."""
    mask = np.asarray(mask, dtype=bool)
    out = {}
    for d, spec in enumerate(data.specs):
        col = np.zeros_like(mask)
        col[:, d] = mask[:, d]
        n_cells = int(col.sum())
        if n_cells == 0:
            continue
        total = predictive_loglik(states, data, col)
        out[spec.name] = {
            "sum": total,
            "count": n_cells,
            "mean": total / n_cells,
            "kind": spec.kind.value,
        }
    return out


def make_heldout_masks(
    data: DataMatrix, n_splits: int, rate: float, seed: int = 0
) -> list[np.ndarray]:
    """Random hold-out masks over the observed cells, one per split."""
    if not 0 < rate < 1:
        raise ValueError("rate must be in (0, 1)")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    observed = ~data.missing
    masks = []
    for child_seed in spawn_seeds(seed, n_splits):
        gen = RngState(int(child_seed)).gen
        mask = (gen.random(data.cells.shape) < rate) & observed
        if not mask.any():
            first = np.argwhere(observed)[0]
            mask[first[0], first[1]] = True
        masks.append(mask)
    return masks


def heldout_benchmark(
    data: DataMatrix,
    hp: Hyperparams,
    rate: float,
    n_splits: int = 5,
    seed: int = 0,
    average_last: int = 1,
) -> dict:
    """Hide a fraction of the observed cells, refit, and score the hidden
    cells. Transform parameters are refit per split from the visible cells
    only. Returns per-split and averaged log predictive scores."""
    masks = make_heldout_masks(data, n_splits, rate, seed)
    chain_seeds = spawn_seeds(seed + 1, n_splits)
    splits = []
    for i, mask in enumerate(masks):
        train = DataMatrix(
            cells=data.cells,
            missing=data.missing | mask,
            specs=data.specs,
            raw=data.raw,
        )
        train = fit_transforms(train)
        rng = RngState(int(chain_seeds[i]))
        chain = run_chain(train, hp, rng=rng, keep_last=average_last)
        scored = DataMatrix(
            cells=data.cells, missing=data.missing, specs=train.specs, raw=data.raw
        )
        total = predictive_loglik(chain.saved, scored, mask)
        by_dim = predictive_loglik_by_dim(chain.saved, scored, mask)
        n_cells = int(mask.sum())
        splits.append(
            {
                "total": total,
                "mean": total / n_cells,
                "n_cells": n_cells,
                "per_dim": by_dim,
            }
        )
    return {
        "rate": rate,
        "splits": splits,
        "mean_per_cell": float(np.mean([s["mean"] for s in splits])),
    }


def as_all_real(data: DataMatrix) -> DataMatrix:
    """Reinterpret every attribute as real-valued on its encoded scale.

    This is the degenerate configuration of the model in which category
    indices, levels, and counts are treated as plain Gaussian observations.
    Useful as a baseline against the typed treatment.
    """
    specs = tuple(
        AttributeSpec(
            name=s.name, kind=AttributeKind.REAL, external_preprocess=s.external_preprocess
        )
        for s in data.specs
    )
    return DataMatrix(cells=data.cells, missing=data.missing, specs=specs, raw=data.raw)


def extract_patterns(state: LatentState, top: int | None = None) -> list[Pattern]:
    """Distinct rows of Z with empirical frequencies, most common first.

    Ordering is deterministic: ties keep the lexicographic order of the
    patterns themselves.
    """
    Zi = state.Z.astype(int)
    uniq, counts = np.unique(Zi, axis=0, return_counts=True)
    order = np.argsort(-counts, kind="stable")
    N = state.N
    patterns = [
        Pattern(
            bits=tuple(int(b) for b in uniq[i]),
            count=int(counts[i]),
            empirical_prob=float(counts[i] / N),
        )
        for i in order
    ]
    return patterns[:top] if top is not None else patterns


def feature_activation_probs(state: LatentState) -> np.ndarray:
    """Fraction of rows using each non-bias feature column."""
    return state.col_sums[state.n_bias :] / state.N


def compute_pdf(
    state: LatentState,
    d: int,
    z: np.ndarray,
    x_values: np.ndarray | None = None,
    n_points: int = 101,
) -> tuple[np.ndarray, np.ndarray]:
    """Predictive distribution of attribute d for feature vector z.

    Discrete kinds return (encoded support, probability mass). Continuous
    kinds return (values in original units, density in original units):
    densities include the mapping change of variables and, when the attribute
    was loaded through a preprocess transform, that transform's Jacobian.
    x_values, when given for a continuous attribute, are original-unit points.
    """
    spec = state.specs[d]
    cs = state.dim_cols(d)
    z = np.asarray(z, dtype=float)
    m = z @ state.B[:, cs]
    var_d = float(state.sigma2[d])
    sd = math.sqrt(var_d)
    kind = spec.kind

    if kind is AttributeKind.CATEGORICAL:
        xs = np.arange(1, spec.R_d + 1)
        p = np.array([prob_categorical(r, z, state.B[:, cs], sd) for r in xs])
        return xs, p
    if kind is AttributeKind.ORDINAL:
        xs = np.arange(1, spec.R_d + 1)
        p = np.array([prob_ordinal(r, float(m[0]), state.theta[d], sd) for r in xs])
        return xs, p
    if kind is AttributeKind.COUNT:
        limit = state.count_xmax.get(d, 200)
        xs = np.arange(0, limit + 1)
        p = np.array([math.exp(log_prob_count(int(x), float(m[0]), spec, sd)) for x in xs])
        return xs, p

    total_var = var_d + state.hp.sigma_u2
    if x_values is None:
        half = 4.0 * math.sqrt(total_var)
        grid_y = np.linspace(float(m[0]) - half, float(m[0]) + half, n_points)
        x_enc = map_forward(grid_y, spec, kind)
    else:
        x_enc = _encode_grid(spec, np.asarray(x_values, dtype=float))
    dens = np.exp(loglik_continuous(x_enc, float(m[0]), total_var, spec, kind))
    x_orig = _decode_grid(spec, x_enc)
    dens = dens * _preprocess_jacobian(spec, x_orig)
    return x_orig, dens


def _encode_grid(spec: AttributeSpec, x_orig: np.ndarray) -> np.ndarray:
    if spec.external_preprocess == "log1p":
        return np.log1p(x_orig)
    if spec.external_preprocess == "reflected-log1p":
        return np.log(101.0 - x_orig)
    return x_orig


def _decode_grid(spec: AttributeSpec, x_enc: np.ndarray) -> np.ndarray:
    if spec.external_preprocess == "log1p":
        return np.expm1(x_enc)
    if spec.external_preprocess == "reflected-log1p":
        return 101.0 - np.exp(x_enc)
    return x_enc


def _preprocess_jacobian(spec: AttributeSpec, x_orig: np.ndarray) -> np.ndarray:
    if spec.external_preprocess == "log1p":
        return 1.0 / (1.0 + x_orig)
    if spec.external_preprocess == "reflected-log1p":
        return 1.0 / (101.0 - x_orig)
    return np.ones_like(x_orig)
