"""Regression random forest built from scratch.

Trees are exact CART: at every node the split minimising the weighted sum of
child squared errors is chosen over all midpoints between consecutive
distinct sorted feature values.  Ties break to the lowest feature index,
then the lowest threshold.  Rows with value <= threshold go left.  Leaves
store the (weight-)mean target.

Bootstrap resampling is expressed as integer sample weights plus index
views; the feature matrix itself is never copied per tree, which keeps
paper-scale training (12e6 rows x 39 features) within a few gigabytes.
Tree construction proceeds level by level over presorted per-feature order
arrays, partitioned in place, so the split search is fully vectorised.

Feature importance is mean decrease in impurity: every split credits its
weighted variance reduction to its feature; per-tree scores are normalised
and averaged.  A constant-target tree has no splits and falls back to the
uniform vector.

Per-tree seeds derive from the forest seed through a splitmix64 step, so
parallel and serial training produce identical forests.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyInput,
    NonFiniteData,
    TruncatedFile,
    VersionMismatch,
)

try:  # optional compiled fast path; the numpy path is semantically identical
    if os.environ.get("TOFCORNER_NO_NUMBA"):
        raise ImportError
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    _HAVE_NUMBA = False

    def _njit(*a, **k):
        def deco(fn):
            return fn

        return deco

FOREST_MAGIC = b"TFRF"
FOREST_VERSION = 1
LEAF_SENTINEL = 0xFFFFFFFF
PURITY_EPS = 1e-12

_NODE_DTYPE = np.dtype([("feature", "<u4"), ("fvalue", "<f8"),
                        ("left", "<u4"), ("right", "<u4")])
_U64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 150
    max_depth: int = 15
    min_samples_split: int = 10_000
    max_features: int | str = "all"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features != "all" and int(self.max_features) < 1:
            raise ValueError("max_features must be 'all' or a positive count")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestConfig":
        return cls(**d)


@_njit(cache=True, nogil=True)
def _scan_feature_kernel(starts, ends, tot_w, tot_wy, order, sval, w, wy,
                         out_score, out_pos, out_lw, out_lwy):
    """Best split per segment for one feature.

    Accumulates weights left to right exactly like a prefix sum, so the
    numpy fallback path (and the brute-force oracle on dyadic data) sees the
    same floating point values.  out_pos holds the order-array index i of
    the winning candidate (split between i and i + 1), or -1.
    """
    for k in range(starts.size):
        s, e = starts[k], ends[k]
        seg_w, seg_wy = tot_w[k], tot_wy[k]
        cw = 0.0
        cwy = 0.0
        best = -np.inf
        bpos = -1
        blw = 0.0
        blwy = 0.0
        for i in range(s, e - 1):
            r = order[i]
            cw += w[r]
            cwy += wy[r]
            if sval[i + 1] > sval[i]:
                rw = seg_w - cw
                rwy = seg_wy - cwy
                sc = cwy * cwy / cw + rwy * rwy / rw
                if sc > best:
                    best = sc
                    bpos = i
                    blw = cw
                    blwy = cwy
        out_score[k] = best
        out_pos[k] = bpos
        out_lw[k] = blw
        out_lwy[k] = blwy


@_njit(cache=True, nogil=True)
def _partition_kernel(starts, ends, order, sval, go_left, tmp_i, tmp_v):
    """Stable in-place partition of each [start, end) slice: rows flagged in
    go_left move to the front, relative order preserved on both sides."""
    for k in range(starts.size):
        s, e = starts[k], ends[k]
        nl = 0
        for i in range(s, e):
            r = order[i]
            if go_left[r]:
                tmp_i[nl] = r
                tmp_v[nl] = sval[i]
                nl += 1
        dest = e - 1
        for i in range(e - 1, s - 1, -1):
            if not go_left[order[i]]:
                order[dest] = order[i]
                sval[dest] = sval[i]
                dest -= 1
        for j in range(nl):
            order[s + j] = tmp_i[j]
            sval[s + j] = tmp_v[j]


def _scan_feature_numpy(starts, ends, tot_w, tot_wy, order, sval, w, wy,
                        out_score, out_pos, out_lw, out_lwy):
    """Pure-numpy twin of _scan_feature_kernel; per-segment prefix sums are
    restarted so both paths see identical floating point values."""
    for k in range(starts.size):
        s, e = int(starts[k]), int(ends[k])
        rows = order[s:e]
        vals = sval[s:e]
        cand = vals[1:] > vals[:-1]
        if not cand.any():
            out_score[k] = -np.inf
            out_pos[k] = -1
            out_lw[k] = 0.0
            out_lwy[k] = 0.0
            continue
        lw = np.cumsum(w[rows])[:-1]
        lwy = np.cumsum(wy[rows])[:-1]
        rw = tot_w[k] - lw
        rwy = tot_wy[k] - lwy
        with np.errstate(divide="ignore", invalid="ignore"):
            sc = lwy * lwy / lw + rwy * rwy / rw
        sc = np.where(cand, sc, -np.inf)
        i = int(np.argmax(sc))  # first occurrence: lowest threshold wins ties
        out_score[k] = sc[i]
        out_pos[k] = s + i
        out_lw[k] = lw[i]
        out_lwy[k] = lwy[i]


def _partition_numpy(starts, ends, orders, svals, go_left):
    for f in range(len(orders)):
        o, v = orders[f], svals[f]
        for k in range(starts.size):
            s, e = int(starts[k]), int(ends[k])
            rows = o[s:e]
            vals = v[s:e]
            g = go_left[rows]
            o[s:e] = np.concatenate((rows[g], rows[~g]))
            v[s:e] = np.concatenate((vals[g], vals[~g]))


def splitmix64(x: int) -> int:
    x &= _U64
    z = (x + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def tree_seed(forest_seed: int, tree_index: int) -> int:
    """Per-tree RNG seed: splitmix64 of (seed + index)."""
    return splitmix64(forest_seed + tree_index)


@dataclass
class Tree:
    """Flat node arrays; feature == LEAF_SENTINEL marks a leaf, in which case
    fvalue holds the leaf mean, otherwise the split threshold."""

    feature: np.ndarray
    fvalue: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        cur = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            f = self.feature[cur]
            internal = f != LEAF_SENTINEL
            if not internal.any():
                break
            r = rows[internal]
            c = cur[internal]
            go_left = X[r, f[internal].astype(np.int64)] <= self.fvalue[c]
            cur[r] = np.where(go_left, self.left[c], self.right[c])
        return self.fvalue[cur]

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF_SENTINEL:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max()) if self.n_nodes else 0


# ---------------------------------------------------------------------------
# single-tree construction


def _build_tree(X, y64, weights, support, cfg: ForestConfig, rng):
    """Grow one tree; returns (Tree, raw importance vector).

    Minimising the summed child SSE is equivalent to maximising the score
    (sum_L wy)^2 / W_L + (sum_R wy)^2 / W_R, which needs only two running
    sums along each feature order; the scan below uses that form.
    """
    n_features = X.shape[1]
    m = support.size
    w = weights if weights is not None else np.ones(m, dtype=np.float64)
    wy = w * y64
    wy2 = wy * y64

    # Per-feature sorted row ids plus their values, partitioned together so
    # every node owns a contiguous slice of both at all times.
    orders, svals = [], []
    for f in range(n_features):
        col = X[support, f]
        o = np.argsort(col, kind="stable").astype(np.int64)
        orders.append(o)
        svals.append(col[o])
    part_i = np.empty(m, dtype=np.int64)
    part_v = np.empty(m, dtype=svals[0].dtype)

    feat, fval, left, right = [], [], [], []
    importance = np.zeros(n_features, dtype=np.float64)

    def new_node() -> int:
        feat.append(LEAF_SENTINEL)
        fval.append(0.0)
        left.append(0)
        right.append(0)
        return len(feat) - 1

    k_sub = n_features if cfg.max_features == "all" else min(int(cfg.max_features), n_features)

    total_w = float(w.sum())
    total_wy = float(wy.sum())
    total_wy2 = float(wy2.sum())
    root = new_node()
    # segment: (node, start, end, W, WY, WY2)
    segments = [(root, 0, m, total_w, total_wy, total_wy2)]
    go_left_buf = np.zeros(m, dtype=bool)

    for depth in range(cfg.max_depth + 1):
        if not segments:
            break
        scan, leaves = [], []
        for seg in segments:
            node, s, e, sw, swy, swy2 = seg
            sse = swy2 - swy * swy / sw
            if (
                depth >= cfg.max_depth
                or sw < cfg.min_samples_split
                or e - s < 2
                or sse / sw <= PURITY_EPS
            ):
                leaves.append(seg)
            else:
                scan.append(seg)
        for node, _s, _e, sw, swy, _swy2 in leaves:
            fval[node] = swy / sw
        if not scan:
            break

        n_seg = len(scan)
        starts = np.array([s for (_, s, _, _, _, _) in scan], dtype=np.int64)
        ends = np.array([e for (_, _, e, _, _, _) in scan], dtype=np.int64)
        tot_w = np.array([sw for (_, _, _, sw, _, _) in scan])
        tot_wy = np.array([swy for (_, _, _, _, swy, _) in scan])

        if k_sub < n_features:
            allowed = np.zeros((n_features, n_seg), dtype=bool)
            for k in range(n_seg):
                allowed[rng.choice(n_features, size=k_sub, replace=False), k] = True
        else:
            allowed = None

        best_score = np.full(n_seg, -np.inf)
        best_feat = np.full(n_seg, -1, dtype=np.int64)
        best_thr = np.zeros(n_seg)
        best_pos = np.full(n_seg, -1, dtype=np.int64)  # order-array index of split
        best_lw = np.zeros(n_seg)
        best_lwy = np.zeros(n_seg)

        f_score = np.empty(n_seg)
        f_pos = np.empty(n_seg, dtype=np.int64)
        f_lw = np.empty(n_seg)
        f_lwy = np.empty(n_seg)
        for f in range(n_features):
            if _HAVE_NUMBA:
                _scan_feature_kernel(starts, ends, tot_w, tot_wy, orders[f],
                                     svals[f], w, wy, f_score, f_pos, f_lw, f_lwy)
            else:
                _scan_feature_numpy(starts, ends, tot_w, tot_wy, orders[f],
                                    svals[f], w, wy, f_score, f_pos, f_lw, f_lwy)
            ok = f_pos >= 0
            if allowed is not None:
                ok &= allowed[f]
            better = ok & (f_score > best_score)
            if not better.any():
                continue
            pick = f_pos[better]
            sv = svals[f]
            best_score[better] = f_score[better]
            best_feat[better] = f
            best_thr[better] = 0.5 * (
                sv[pick].astype(np.float64) + sv[pick + 1].astype(np.float64)
            )
            best_pos[better] = pick
            best_lw[better] = f_lw[better]
            best_lwy[better] = f_lwy[better]

        split_ids = [k for k in range(n_seg) if best_feat[k] >= 0]
        next_segments = []
        for k in range(n_seg):
            node, s, e, sw, swy, swy2 = scan[k]
            if best_feat[k] < 0:
                fval[node] = swy / sw
                continue
            bf = int(best_feat[k])
            # decrease = sse_parent - (sse_L + sse_R) = score - WY^2/W
            importance[bf] += max(best_score[k] - swy * swy / sw, 0.0)
            n_left_rows = int(best_pos[k] - s + 1)
            left_rows = orders[bf][s : s + n_left_rows]
            go_left_buf[left_rows] = True
            lwy2_k = float(wy2[left_rows].sum())

            feat[node] = bf
            fval[node] = float(best_thr[k])
            lnode = new_node()
            rnode = new_node()
            left[node] = lnode
            right[node] = rnode
            lw_k, lwy_k = best_lw[k], best_lwy[k]
            next_segments.append((lnode, s, s + n_left_rows, lw_k, lwy_k, lwy2_k))
            next_segments.append(
                (rnode, s + n_left_rows, e, sw - lw_k, swy - lwy_k, swy2 - lwy2_k)
            )

        if split_ids:
            sstarts = starts[split_ids]
            sends = ends[split_ids]
            if _HAVE_NUMBA:
                for f in range(n_features):
                    _partition_kernel(sstarts, sends, orders[f], svals[f],
                                      go_left_buf, part_i, part_v)
            else:
                _partition_numpy(sstarts, sends, orders, svals, go_left_buf)
            # reset buffer for the next level
            for k in split_ids:
                node, s, e, *_ = scan[k]
                go_left_buf[orders[0][s:e]] = False

        segments = next_segments

    for node, _s, _e, sw, swy, _swy2 in segments:
        # only reachable if the loop broke with pending segments
        fval[node] = swy / sw

    tree = Tree(
        feature=np.asarray(feat, dtype=np.uint32),
        fvalue=np.asarray(fval, dtype=np.float64),
        left=np.asarray(left, dtype=np.uint32),
        right=np.asarray(right, dtype=np.uint32),
    )
    return tree, importance


def _train_single(X, y, cfg: ForestConfig, index: int):
    rng = np.random.Generator(np.random.PCG64(tree_seed(cfg.seed, index)))
    n = X.shape[0]
    if cfg.bootstrap:
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        support = np.flatnonzero(counts)
        weights = counts[support].astype(np.float64)
    else:
        support = np.arange(n)
        weights = None
    y64 = y[support].astype(np.float64)
    return _build_tree(X, y64, weights, support, cfg, rng)


_FORK_DATA: dict = {}


def _train_worker(index: int):
    d = _FORK_DATA
    return _train_single(d["X"], d["y"], d["cfg"], index)


def train(X, y, config: ForestConfig = ForestConfig(), layout=None, n_jobs: int = 1):
    """Train a forest on an (N, F) matrix and an N-vector of targets."""
    X = np.asarray(X)
    y = np.asarray(y)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    n, n_features = X.shape
    if n == 0 or n_features == 0:
        raise EmptyInput("empty training matrix")
    if y.shape != (n,):
        raise DimensionMismatch(f"y shape {y.shape} does not match {n} rows")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFiniteData("training data contains NaN or infinity")
    if layout is not None and len(layout) != n_features:
        raise DimensionMismatch(
            f"layout names {len(layout)} vs {n_features} feature columns"
        )

    if n_jobs > 1:
        try:
            ctx = get_context("fork")
        except ValueError:
            ctx = None
        if ctx is not None:
            _FORK_DATA.update(X=X, y=y, cfg=config)
            try:
                with ctx.Pool(n_jobs) as pool:
                    results = pool.map(_train_worker, range(config.n_trees))
            finally:
                _FORK_DATA.clear()
        else:
            results = [_train_single(X, y, config, i) for i in range(config.n_trees)]
    else:
        results = [_train_single(X, y, config, i) for i in range(config.n_trees)]

    trees = [t for t, _ in results]
    per_tree = np.zeros((len(trees), n_features), dtype=np.float64)
    for i, (_, imp) in enumerate(results):
        s = imp.sum()
        per_tree[i] = imp / s if s > 0.0 else np.full(n_features, 1.0 / n_features)
    importances = per_tree.mean(axis=0)
    importances = importances / importances.sum()

    return RegressionForest(trees=trees, importances=importances,
                            config=config, layout=list(layout) if layout else None)


# ---------------------------------------------------------------------------
# the trained model


@dataclass
class RegressionForest:
    trees: list[Tree]
    importances: np.ndarray
    config: ForestConfig
    layout: list[str] | None = None

    @property
    def n_features(self) -> int:
        return self.importances.size

    def predict(self, X, layout=None) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"X shape {X.shape} does not match {self.n_features} features"
            )
        if layout is not None and self.layout is not None and list(layout) != self.layout:
            raise DimensionMismatch("feature layout differs from the training layout")
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        return self.importances.copy()

    # -- serialization ------------------------------------------------------

    def save_bytes(self) -> bytes:
        header = json.dumps(
            {
                "format_version": FOREST_VERSION,
                "n_trees": len(self.trees),
                "n_features": self.n_features,
                "config": self.config.to_dict(),
                "layout": self.layout,
                "importances": self.importances.tolist(),
            },
            sort_keys=True,
        ).encode("utf-8")
        parts = [FOREST_MAGIC, struct.pack("<II", FOREST_VERSION, len(header)), header]
        for tree in self.trees:
            nodes = np.empty(tree.n_nodes, dtype=_NODE_DTYPE)
            nodes["feature"] = tree.feature
            nodes["fvalue"] = tree.fvalue
            nodes["left"] = tree.left
            nodes["right"] = tree.right
            parts.append(struct.pack("<I", tree.n_nodes))
            parts.append(nodes.tobytes())
        return b"".join(parts)

    def save(self, path) -> None:
        Path(path).write_bytes(self.save_bytes())

    @classmethod
    def load_bytes(cls, blob: bytes) -> "RegressionForest":
        if len(blob) < 12:
            raise TruncatedFile("forest blob shorter than its fixed header")
        if blob[:4] != FOREST_MAGIC:
            raise BadMagic(f"bad forest magic {blob[:4]!r}")
        version, header_len = struct.unpack_from("<II", blob, 4)
        if version != FOREST_VERSION:
            raise VersionMismatch(f"unsupported forest version {version}")
        off = 12
        if len(blob) < off + header_len:
            raise TruncatedFile("forest header truncated")
        header = json.loads(blob[off : off + header_len].decode("utf-8"))
        off += header_len
        trees = []
        for _ in range(header["n_trees"]):
            if len(blob) < off + 4:
                raise TruncatedFile("forest tree table truncated")
            (n_nodes,) = struct.unpack_from("<I", blob, off)
            off += 4
            nbytes = n_nodes * _NODE_DTYPE.itemsize
            if len(blob) < off + nbytes:
                raise TruncatedFile("forest node array truncated")
            nodes = np.frombuffer(blob, dtype=_NODE_DTYPE, count=n_nodes, offset=off)
            off += nbytes
            trees.append(
                Tree(
                    feature=nodes["feature"].copy(),
                    fvalue=nodes["fvalue"].copy(),
                    left=nodes["left"].copy(),
                    right=nodes["right"].copy(),
                )
            )
        return cls(
            trees=trees,
            importances=np.asarray(header["importances"], dtype=np.float64),
            config=ForestConfig.from_dict(header["config"]),
            layout=header["layout"],
        )

    @classmethod
    def load(cls, path) -> "RegressionForest":
        return cls.load_bytes(Path(path).read_bytes())


def estimate_training_memory_bytes(n_rows: int, n_features: int, n_jobs: int = 1,
                                   value_bytes: int = 4) -> int:
    """Peak additional memory of train() beyond the caller's X and y.

    The bootstrap is weights plus index views, so the feature matrix is
    never copied.  Per concurrent tree the working set is: per-feature order
    arrays (int64) and sorted value arrays (X dtype), the weight/target
    product vectors (3 x float64), and roughly eight transient float64
    vectors during the level scan.
    """
    per_tree = n_rows * ((8 + value_bytes) * n_features + 3 * 8 + 8 * 8)
    return per_tree * max(1, n_jobs)
