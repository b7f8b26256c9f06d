"""Synthetic mixed-type tables with known latent structure, for tests and
experiments. Rows share a small set of binary features; each attribute is a
noisy linear readout of those features pushed through its type's mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glfm.data import AttributeKind, AttributeSpec, DataMatrix, render_csv
from glfm.likelihoods import map_forward
from glfm.randkit import RngState

__all__ = ["GroundTruth", "default_specs", "generate", "to_csv"]


@dataclass
class GroundTruth:
    """What generate() drew: features, weights, cut points, noise scale."""

    Z: np.ndarray
    B: np.ndarray
    theta: dict[int, np.ndarray]
    sigma_y: float


def default_specs() -> tuple[AttributeSpec, ...]:
    """One attribute of each kind plus a second real column.

    The transform parameters are part of the generating process: they are
    deliberately not (1, 0) so that refitting transforms from data is
    exercised downstream.
    """
    return (
        AttributeSpec(name="r1", kind=AttributeKind.REAL, w=2.0, mu=-1.0),
        AttributeSpec(name="p1", kind=AttributeKind.POSITIVE_REAL, w=1.0, mu=2.0),
        AttributeSpec(name="c1", kind=AttributeKind.CATEGORICAL, R_d=3),
        AttributeSpec(name="o1", kind=AttributeKind.ORDINAL, R_d=3),
        AttributeSpec(name="n1", kind=AttributeKind.COUNT, w=1.0, mu=3.0),
        AttributeSpec(name="r2", kind=AttributeKind.REAL, w=1.0, mu=0.5),
    )


def generate(
    n_rows: int,
    specs: tuple[AttributeSpec, ...] | None = None,
    k_true: int = 3,
    bias: bool = True,
    sigma_B: float = 1.0,
    sigma_y: float = 0.5,
    missing_rate: float = 0.0,
    seed: int = 0,
) -> tuple[DataMatrix, GroundTruth]:
    """Draw a table of n_rows observations over the given attribute specs.

    Z is k_true Bernoulli(1/2) columns (plus an always-on bias column when
    bias is set), weights are N(0, sigma_B^2) with the last categorical
    column pinned at zero, and pseudo-observations get N(0, sigma_y^2) noise
    before the per-kind mapping. Ordinal attributes use the fixed cut points
    (0, 1, 2, ...). missing_rate blanks cells completely at random.

    Returns the data with default transform parameters on its specs (ready
    for fit_transforms) and the generating latent values.
    """
    if specs is None:
        specs = default_specs()
    rng = RngState(seed)

    cols = []
    if bias:
        cols.append(np.ones((n_rows, 1)))
    cols.append((rng.gen.random((n_rows, k_true)) < 0.5).astype(float))
    Z = np.hstack(cols)
    K = Z.shape[1]

    widths = [s.S_d for s in specs]
    offsets = np.concatenate([[0], np.cumsum(widths)]).astype(int)
    S = int(offsets[-1])
    B = rng.gen.normal(0.0, sigma_B, size=(K, S))

    theta: dict[int, np.ndarray] = {}
    cells = np.empty((n_rows, len(specs)))
    for d, spec in enumerate(specs):
        cs = slice(int(offsets[d]), int(offsets[d + 1]))
        if spec.kind is AttributeKind.CATEGORICAL:
            B[:, cs.stop - 1] = 0.0
        Yd = Z @ B[:, cs] + sigma_y * rng.gen.standard_normal((n_rows, spec.S_d))
        if spec.kind is AttributeKind.CATEGORICAL:
            cells[:, d] = np.argmax(Yd, axis=1) + 1
        elif spec.kind is AttributeKind.ORDINAL:
            theta[d] = np.arange(spec.R_d - 1, dtype=float)
            cells[:, d] = map_forward(Yd[:, 0], spec, spec.kind, theta=theta[d])
        else:
            cells[:, d] = map_forward(Yd[:, 0], spec, spec.kind)

    missing = np.zeros(cells.shape, dtype=bool)
    if missing_rate > 0.0:
        missing = rng.gen.random(cells.shape) < missing_rate
    shown = cells.copy()
    shown[missing] = np.nan

    clean_specs = tuple(
        AttributeSpec(name=s.name, kind=s.kind, R_d=s.R_d) for s in specs
    )
    data = DataMatrix(cells=shown, missing=missing, specs=clean_specs)
    return data, GroundTruth(Z=Z, B=B, theta=theta, sigma_y=sigma_y)


def to_csv(data: DataMatrix) -> str:
    """CSV text of a generated table (missing cells left empty)."""
    return render_csv(data)
