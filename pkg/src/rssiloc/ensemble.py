"""Stacked tree-ensemble position estimator.

Three tree learners (extra trees, a single CART tree, a random forest) are
each trained on one third of the dataset; their full-dataset predictions
then feed a per-coordinate multiple linear regression that produces the
final coordinate estimate:

    X = a1 + W1 * x_et + W2 * x_dt + W3 * x_rf    (and likewise for Y)

Because the combiner is ordinary least squares over a feature family that
contains each single component, its in-sample RMSE never exceeds the best
component's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import TooFewSamples
from .learners import (fit_extra_trees, fit_forest, fit_tree, model_from_dict,
                       model_to_dict, register_model_kind, _wrap)

COMPONENT_NAMES = ("extra_trees", "decision_tree", "random_forest")

# Combiner coefficients published for the reference indoor testbed:
# (intercept, extra-trees, decision-tree, random-forest) per coordinate.
REFERENCE_COMBINER_X = (-0.9494, 0.8036, 0.5476, 0.5212)
REFERENCE_COMBINER_Y = (-0.8348, 0.8922, 0.5937, 0.5292)

DEFAULT_TREE_DEPTH = 25
DEFAULT_FOREST_TREES = 100
DEFAULT_EXTRA_TREES = 100


@dataclass(frozen=True)
class TreeLocModel:
    """Fitted stacking ensemble.

    components hold the per-coordinate tree models in COMPONENT_NAMES
    order; combiner_x / combiner_y are (intercept, w_et, w_dt, w_rf). mode
    is "fitted" for OLS-derived combiners or "reference" for the published
    fixed coefficients.
    """

    components: Tuple[object, object, object]
    combiner_x: Tuple[float, float, float, float]
    combiner_y: Tuple[float, float, float, float]
    mode: str = "fitted"
    rng_seed: int = 0

    def combine(self, comp_x, comp_y) -> np.ndarray:
        """Apply the combiner to raw component outputs.

        comp_x and comp_y are length-3 vectors (or (N, 3) matrices) of the
        component predictions in COMPONENT_NAMES order.
        """
        cx = np.atleast_2d(np.asarray(comp_x, dtype=float))
        cy = np.atleast_2d(np.asarray(comp_y, dtype=float))
        bx = np.asarray(self.combiner_x)
        by = np.asarray(self.combiner_y)
        x = bx[0] + cx @ bx[1:]
        y = by[0] + cy @ by[1:]
        out = np.column_stack([x, y])
        return out[0] if np.asarray(comp_x).ndim == 1 else out

    def component_predictions(self, features) -> np.ndarray:
        """Stacked component outputs, shape (N, 3, 2)."""
        x = np.atleast_2d(np.asarray(features, dtype=float))
        return np.stack([m.predict(x) for m in self.components], axis=1)

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        preds = self.component_predictions(x)
        out = self.combine(preds[:, :, 0], preds[:, :, 1])
        return out[0] if single else out

    def to_dict(self) -> dict:
        return _wrap("treeloc",
                     {"mode": self.mode, "rng_seed": self.rng_seed},
                     {"combiner_x": list(self.combiner_x),
                      "combiner_y": list(self.combiner_y),
                      "components": [model_to_dict(m) for m in self.components]})


def _treeloc_from_dict(data: dict) -> TreeLocModel:
    p, h = data["parameters"], data["hyperparameters"]
    comps = tuple(model_from_dict(c) for c in p["components"])
    return TreeLocModel(components=comps,
                        combiner_x=tuple(p["combiner_x"]),
                        combiner_y=tuple(p["combiner_y"]),
                        mode=h["mode"], rng_seed=h.get("rng_seed", 0))


register_model_kind("treeloc", _treeloc_from_dict)


def _thirds(n: int) -> Tuple[slice, slice, slice]:
    # Equal thirds; remainder rows go to the last third.
    size = n // 3
    return slice(0, size), slice(size, 2 * size), slice(2 * size, n)


def _ols_combiner(component_preds: np.ndarray, truth: np.ndarray) -> Tuple[float, ...]:
    design = np.hstack([np.ones((len(truth), 1)), component_preds])
    coef, *_ = np.linalg.lstsq(design, truth, rcond=None)
    return tuple(float(c) for c in coef)


def treeloc_fit(features, targets, rng_seed: int = 0,
                combiner_holdout: float = 0.0, shuffle: bool = False,
                tree_depth: int = DEFAULT_TREE_DEPTH,
                forest_trees: int = DEFAULT_FOREST_TREES,
                extra_trees: int = DEFAULT_EXTRA_TREES,
                min_leaf: int = 1) -> TreeLocModel:
    """Fit the stacking ensemble.

    The dataset is partitioned into three contiguous thirds (pass
    shuffle=True for a seeded random partition): extra trees train on the
    first, the CART tree on the second, the random forest on the third.
    Each component then predicts the combiner fitting set, which is the
    full dataset unless combiner_holdout reserves a trailing fraction for
    the combiner regression only. The per-coordinate combiners come from
    OLS of the actual coordinates on (1, components), using the
    pseudo-inverse so collinear component outputs still yield finite
    coefficients.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    n = len(x)
    if n < 6:
        raise TooFewSamples(f"need at least 6 samples, got {n}")
    if not 0.0 <= combiner_holdout < 1.0:
        raise ValueError("combiner_holdout must be in [0, 1)")

    order = np.arange(n)
    if shuffle:
        order = np.random.default_rng(rng_seed).permutation(n)

    n_hold = int(round(n * combiner_holdout))
    if n_hold > 0:
        fit_rows, comb_rows = order[:-n_hold], order[-n_hold:]
    else:
        fit_rows, comb_rows = order, order
    if len(fit_rows) < 6:
        raise TooFewSamples("holdout leaves too few samples for the components")

    s1, s2, s3 = _thirds(len(fit_rows))
    et = fit_extra_trees(x[fit_rows[s1]], y[fit_rows[s1]], n_trees=extra_trees,
                         max_depth=tree_depth, min_leaf=min_leaf,
                         rng_seed=rng_seed)
    dt = fit_tree(x[fit_rows[s2]], y[fit_rows[s2]], max_depth=tree_depth,
                  min_leaf=min_leaf, rng_seed=rng_seed)
    rf = fit_forest(x[fit_rows[s3]], y[fit_rows[s3]], n_trees=forest_trees,
                    max_depth=tree_depth, min_leaf=min_leaf,
                    rng_seed=rng_seed)

    components = (et, dt, rf)
    preds = np.stack([m.predict(x[comb_rows]) for m in components], axis=1)
    combiner_x = _ols_combiner(preds[:, :, 0], y[comb_rows, 0])
    combiner_y = _ols_combiner(preds[:, :, 1], y[comb_rows, 1])
    return TreeLocModel(components=components, combiner_x=combiner_x,
                        combiner_y=combiner_y, mode="fitted",
                        rng_seed=rng_seed)


def treeloc_reference(components: Optional[Tuple[object, object, object]] = None
                      ) -> TreeLocModel:
    """Ensemble with the published fixed combiner coefficients.

    Components may be omitted when only the combiner arithmetic is needed
    (predict then requires calling :meth:`TreeLocModel.combine` directly).
    """
    return TreeLocModel(components=components or (None, None, None),
                        combiner_x=REFERENCE_COMBINER_X,
                        combiner_y=REFERENCE_COMBINER_Y,
                        mode="reference")


def treeloc_predict(model: TreeLocModel, features) -> np.ndarray:
    """Coordinate estimates for RSSI rows; see TreeLocModel.predict."""
    return model.predict(features)
