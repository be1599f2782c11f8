"""Deterministic reference forward pass of the hierarchical simplicial
message passing encoder.

Per filtration level, simplex features are projected to a common hidden
width D, split into k heads of width D/k, and updated for T layers: each
simplex aggregates messages from its upper-adjacent neighbors, where a
message is ReLU(coface state + neighbor state), aggregation is a
channel-wise softmax-weighted sum, and the update is a two-layer MLP of
(own state + aggregate). Heads are re-concatenated afterwards.

Levels run coarsest to finest. Between consecutive levels, cross-scale
refinement computes, for every simplex of the finer complex,

    fine + coarse * MLP(coarse || MLP(coarse))

so coarse-scale context gates a residual update of the finer features.
At the finest level only node updates run; the mean over final atom states
feeds a two-layer regression head.

Every reduction whose operand order depends on atom numbering is value-
sorted and tree-reduced (see ``numerics``), making predictions bitwise
invariant under atom relabeling in 64-bit mode. All ops optionally carry a
forward-mode tangent so directional derivatives with respect to any single
weight tensor can be accumulated analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complexes import Filtration, SimplicialComplex
from .errors import ValidationError, VersionMismatchError, WeightFormatError
from .features import (
    EDGE_FEATURE_DIM,
    FEATURE_SCHEMA_VERSION,
    TRIANGLE_FEATURE_DIM,
    VERTEX_FEATURE_DIM,
    SimplexFeatureSet,
)
from .numerics import pooled_mean, softmax_aggregate
from .tensorio import read_container, write_container

DEFAULT_HIDDEN_DIM = 768
DEFAULT_HEADS = 12
DEFAULT_CUTOFFS = (2.0, 3.0, 4.0)
# layer counts aligned with ascending cutoffs: the finest level runs node
# updates only, coarser levels run edge updates before node updates
DEFAULT_EDGE_LAYERS = (0, 4, 4)
DEFAULT_NODE_LAYERS = (6, 6, 6)

_DIM_TAGS = {0: "v", 1: "e", 2: "t"}
_INPUT_DIMS = {0: VERTEX_FEATURE_DIM, 1: EDGE_FEATURE_DIM, 2: TRIANGLE_FEATURE_DIM}


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    heads: int = DEFAULT_HEADS
    cutoffs: tuple[float, ...] = DEFAULT_CUTOFFS
    edge_layers: tuple[int, ...] = DEFAULT_EDGE_LAYERS
    node_layers: tuple[int, ...] = DEFAULT_NODE_LAYERS
    schema_version: str = FEATURE_SCHEMA_VERSION
    dtype: str = "f64"

    def __post_init__(self):
        if self.hidden_dim % self.heads != 0:
            raise ValidationError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")
        if len(self.edge_layers) != len(self.cutoffs) or len(self.node_layers) != len(self.cutoffs):
            raise ValidationError("layer schedule must list one entry per cutoff")
        if any(t < 0 for t in self.edge_layers + self.node_layers):
            raise ValidationError("layer counts must be non-negative")
        if self.dtype not in ("f32", "f64"):
            raise ValidationError(f"dtype must be f32 or f64, got {self.dtype}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads

    @property
    def n_levels(self) -> int:
        return len(self.cutoffs)

    def to_dict(self) -> dict:
        return {
            "hidden_dim": self.hidden_dim,
            "heads": self.heads,
            "cutoffs": list(self.cutoffs),
            "edge_layers": list(self.edge_layers),
            "node_layers": list(self.node_layers),
            "schema_version": self.schema_version,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            hidden_dim=int(d["hidden_dim"]),
            heads=int(d["heads"]),
            cutoffs=tuple(float(c) for c in d["cutoffs"]),
            edge_layers=tuple(int(t) for t in d["edge_layers"]),
            node_layers=tuple(int(t) for t in d["node_layers"]),
            schema_version=str(d["schema_version"]),
            dtype=str(d.get("dtype", "f64")),
        )


def iter_tensor_shapes(config: ModelConfig):
    """Yield every (name, shape) the weight manifest must contain."""
    d = config.hidden_dim
    dh = config.head_dim
    for li in range(config.n_levels):
        level = li + 1
        for dim, tag in _DIM_TAGS.items():
            yield f"proj.L{level}.{tag}.w", (_INPUT_DIMS[dim], d)
            yield f"proj.L{level}.{tag}.b", (d,)
        for kind, count in (("edge", config.edge_layers[li]), ("node", config.node_layers[li])):
            for t in range(count):
                for h in range(config.heads):
                    base = f"mp.L{level}.{kind}.l{t}.h{h}"
                    yield f"{base}.w1", (dh, dh)
                    yield f"{base}.b1", (dh,)
                    yield f"{base}.w2", (dh, dh)
                    yield f"{base}.b2", (dh,)
    for li in range(config.n_levels - 1, 0, -1):
        # refinement from 1-based level li+1 (coarse) into level li (fine)
        trans = f"csr.L{li + 1}to{li}"
        for tag in _DIM_TAGS.values():
            yield f"{trans}.{tag}.inner.w1", (d, d)
            yield f"{trans}.{tag}.inner.b1", (d,)
            yield f"{trans}.{tag}.inner.w2", (d, d)
            yield f"{trans}.{tag}.inner.b2", (d,)
            yield f"{trans}.{tag}.outer.w1", (2 * d, d)
            yield f"{trans}.{tag}.outer.b1", (d,)
            yield f"{trans}.{tag}.outer.w2", (d, d)
            yield f"{trans}.{tag}.outer.b2", (d,)
    yield "head.w1", (d, d)
    yield "head.b1", (d,)
    yield "head.w2", (d, 1)
    yield "head.b2", (1,)


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    return dict(iter_tensor_shapes(config))


def validate_manifest(config: ModelConfig, shapes: dict[str, tuple[int, ...]]) -> None:
    """Validate a name->shape manifest without materializing tensor data."""
    expected = expected_shapes(config)
    for name, shape in expected.items():
        if name not in shapes:
            raise WeightFormatError(f"missing tensor {name!r}")
        if tuple(shapes[name]) != shape:
            raise WeightFormatError(f"tensor {name!r} has shape {tuple(shapes[name])}, expected {shape}")
    extras = sorted(set(shapes) - set(expected))
    if extras:
        raise WeightFormatError(f"unexpected tensors in manifest: {extras}")


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    seed: int | None = None

    def validate(self) -> None:
        validate_manifest(self.config, {name: tuple(a.shape) for name, a in self.tensors.items()})


def generate_test_weights(config: ModelConfig, seed: int) -> ModelWeights:
    """Seed-generated weights for testing; matrices scale with 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    np_dtype = np.float32 if config.dtype == "f32" else np.float64
    tensors = {}
    for name, shape in iter_tensor_shapes(config):
        scale = 1.0 / np.sqrt(shape[0]) if len(shape) == 2 else 0.05
        tensors[name] = (rng.standard_normal(shape) * scale).astype(np_dtype)
    weights = ModelWeights(config=config, tensors=tensors, seed=seed)
    weights.validate()
    return weights


def save_weights(path, weights: ModelWeights) -> None:
    meta = {"kind": "model-weights", "config": weights.config.to_dict()}
    if weights.seed is not None:
        meta["seed"] = weights.seed
    write_container(path, weights.tensors, meta)


def load_weights(path) -> ModelWeights:
    tensors, meta = read_container(path)
    if meta.get("kind") != "model-weights":
        raise WeightFormatError(f"{path}: container does not hold model weights")
    config = ModelConfig.from_dict(meta["config"])
    want = np.float32 if config.dtype == "f32" else np.float64
    for name, arr in tensors.items():
        if arr.dtype != want:
            raise WeightFormatError(f"tensor {name!r} dtype {arr.dtype} does not match config dtype {config.dtype}")
    weights = ModelWeights(config=config, tensors=tensors, seed=meta.get("seed"))
    weights.validate()
    return weights


# ---------------------------------------------------------------------------
# tangent-carrying primitives
# ---------------------------------------------------------------------------


class _WeightView:
    """Weight accessor that optionally seeds a tangent on one tensor."""

    def __init__(
        self,
        weights: "ModelWeights",
        tangent_name: str | None = None,
        tangent: np.ndarray | None = None,
    ):
        self.config = weights.config
        self.tensors = weights.tensors
        self.tangent_name = tangent_name
        self.tangent = tangent
        if tangent_name is not None:
            if tangent_name not in self.tensors:
                raise WeightFormatError(f"unknown tensor {tangent_name!r}")
            if tangent is None or tuple(tangent.shape) != tuple(self.tensors[tangent_name].shape):
                raise ValidationError("tangent direction must match the probed tensor's shape")
        self.active = tangent_name is not None

    def get(self, name: str) -> tuple[np.ndarray, np.ndarray | None]:
        val = self.tensors[name]
        if self.active and name == self.tangent_name:
            return val, self.tangent
        return val, None


def _as_view(weights) -> _WeightView:
    return weights if isinstance(weights, _WeightView) else _WeightView(weights)


def _add(a, da, b, db):
    val = a + b
    if da is None and db is None:
        return val, None
    if da is not None and db is not None:
        tan = da + db
    elif da is not None:
        tan = da
    else:
        tan = db
    return val, np.array(np.broadcast_to(tan, val.shape))


def _matmul(x, dx, w, dw):
    val = x @ w
    tan = None
    if dx is not None:
        tan = dx @ w
    if dw is not None:
        tan = (x @ dw) if tan is None else tan + x @ dw
    return val, tan


def _relu(x, dx):
    mask = x > 0
    val = np.where(mask, x, 0.0)
    return val, (np.where(mask, dx, 0.0) if dx is not None else None)


def _linear(x, dx, wview: _WeightView, prefix: str):
    w, dw = wview.get(f"{prefix}.w")
    b, db = wview.get(f"{prefix}.b")
    val, tan = _matmul(x, dx, w, dw)
    return _add(val, tan, b, db)


def _mlp2(x, dx, wview: _WeightView, prefix: str):
    w1, dw1 = wview.get(f"{prefix}.w1")
    b1, db1 = wview.get(f"{prefix}.b1")
    w2, dw2 = wview.get(f"{prefix}.w2")
    b2, db2 = wview.get(f"{prefix}.b2")
    z, dz = _matmul(x, dx, w1, dw1)
    z, dz = _add(z, dz, b1, db1)
    a, da = _relu(z, dz)
    y, dy = _matmul(a, da, w2, dw2)
    return _add(y, dy, b2, db2)


# ---------------------------------------------------------------------------
# level state and blocks
# ---------------------------------------------------------------------------


@dataclass
class LevelState:
    """Hidden vectors (and optional tangents) per simplex dimension."""

    values: dict[int, np.ndarray]
    tangents: dict[int, np.ndarray | None] = field(default_factory=dict)

    def get(self, dim: int) -> tuple[np.ndarray, np.ndarray | None]:
        return self.values[dim], self.tangents.get(dim)

    def with_dim(self, dim: int, value: np.ndarray, tangent: np.ndarray | None) -> "LevelState":
        values = dict(self.values)
        tangents = dict(self.tangents)
        values[dim] = value
        tangents[dim] = tangent
        return LevelState(values=values, tangents=tangents)


def _stack_heads(wview: _WeightView, base: str, heads: int, part: str):
    vals, tans = [], []
    any_tan = False
    for h in range(heads):
        v, t = wview.get(f"{base}.h{h}.{part}")
        vals.append(v)
        tans.append(t)
        any_tan = any_tan or t is not None
    stacked = np.stack(vals)
    if not any_tan:
        return stacked, None
    return stacked, np.stack([t if t is not None else np.zeros_like(v) for v, t in zip(vals, tans)])


def _headwise_mlp(x, dx, wview: _WeightView, layer_base: str, heads: int):
    """Two-layer MLP with separate parameters per head; x is (n, k, dh)."""

    def mm(a, da, w, dw):
        val = np.einsum("nkd,kde->nke", a, w)
        tan = None
        if da is not None:
            tan = np.einsum("nkd,kde->nke", da, w)
        if dw is not None:
            extra = np.einsum("nkd,kde->nke", a, dw)
            tan = extra if tan is None else tan + extra
        return val, tan

    w1, dw1 = _stack_heads(wview, layer_base, heads, "w1")
    b1, db1 = _stack_heads(wview, layer_base, heads, "b1")
    w2, dw2 = _stack_heads(wview, layer_base, heads, "w2")
    b2, db2 = _stack_heads(wview, layer_base, heads, "b2")
    z, dz = mm(x, dx, w1, dw1)
    z, dz = _add(z, dz, b1[None], db1[None] if db1 is not None else None)
    a, da = _relu(z, dz)
    y, dy = mm(a, da, w2, dw2)
    return _add(y, dy, b2[None], db2[None] if db2 is not None else None)


def _upper_adjacency_rows(complex_: SimplicialComplex, dim: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per target simplex: row indices of (neighbor, shared coface) pairs."""
    rows = []
    for sigma in complex_.simplices[dim]:
        srcs, cofs = [], []
        for tau in complex_.cofaces[sigma]:
            for nbr in complex_.faces[tau]:
                if nbr != sigma:
                    srcs.append(complex_.ordinal[nbr])
                    cofs.append(complex_.ordinal[tau])
        rows.append((np.array(srcs, dtype=np.intp), np.array(cofs, dtype=np.intp)))
    return rows


def multi_head_block(
    state: LevelState,
    complex_: SimplicialComplex,
    dim: int,
    layers: int,
    weights,
    prefix: str,
) -> LevelState:
    """Run ``layers`` rounds of multi-head message passing on ``dim``-simplices.

    With zero layers (or no simplices of the dimension) the state passes
    through untouched: head split followed by concatenation is the identity.
    Empty upper-adjacent neighborhoods aggregate to the zero vector, so the
    update degenerates to MLP(own state).
    """
    wview = _as_view(weights)
    n = state.values[dim].shape[0]
    if layers == 0 or n == 0:
        return state
    heads, dh = wview.config.heads, wview.config.head_dim

    h, h_tan = state.get(dim)
    hs = h.reshape(n, heads, dh)
    dhs = h_tan.reshape(n, heads, dh) if h_tan is not None else None

    cof = state.values.get(dim + 1)
    if cof is not None and cof.shape[0] > 0:
        cof_vals = cof.reshape(cof.shape[0], heads, dh)
        cof_tan_full = state.tangents.get(dim + 1)
        cof_tans = cof_tan_full.reshape(cof.shape[0], heads, dh) if cof_tan_full is not None else None
    else:
        cof_vals, cof_tans = None, None

    adjacency = _upper_adjacency_rows(complex_, dim)
    track = dhs is not None or cof_tans is not None or wview.active

    for t in range(layers):
        pre = np.empty_like(hs)
        dpre = np.zeros_like(hs) if track else None
        for r in range(n):
            srcs, cofs = adjacency[r]
            if len(srcs) and cof_vals is not None:
                raw = hs[srcs] + cof_vals[cofs]
                draw = None
                if track:
                    draw = np.zeros_like(raw)
                    if dhs is not None:
                        draw += dhs[srcs]
                    if cof_tans is not None:
                        draw += cof_tans[cofs]
                msg, dmsg = _relu(raw, draw)
                agg, dagg = softmax_aggregate(msg, dmsg)
            else:
                agg = np.zeros((heads, dh), dtype=hs.dtype)
                dagg = np.zeros((heads, dh)) if track else None
            pre[r] = hs[r] + agg
            if track:
                dpre[r] = (dhs[r] if dhs is not None else 0.0) + (dagg if dagg is not None else 0.0)
        hs, dhs = _headwise_mlp(pre, dpre, wview, f"{prefix}.l{t}", heads)
        if track and dhs is None:
            dhs = np.zeros_like(hs)

    return state.with_dim(dim, hs.reshape(n, heads * dh), dhs.reshape(n, heads * dh) if dhs is not None else None)


def cross_scale_refine(
    fine_state: LevelState,
    coarse_state: LevelState,
    fine_complex: SimplicialComplex,
    coarse_complex: SimplicialComplex,
    weights,
    prefix: str,
) -> LevelState:
    """Gated residual refinement of fine-level states by coarse-level states.

    Simplices are matched across levels by vertex tuple; by filtration
    nestedness every fine simplex must exist at the coarse level.
    """
    wview = _as_view(weights)
    out = fine_state
    for dim, tag in _DIM_TAGS.items():
        fine_simplices = fine_complex.simplices.get(dim, [])
        xf, dxf = fine_state.get(dim)
        if not fine_simplices:
            continue
        rows = []
        for sigma in fine_simplices:
            if sigma not in coarse_complex:
                raise AssertionError(f"nestedness violated: {sigma} missing at eps={coarse_complex.epsilon}")
            rows.append(coarse_complex.ordinal[sigma])
        rows = np.array(rows, dtype=np.intp)
        xc_all, dxc_all = coarse_state.get(dim)
        xc = xc_all[rows]
        dxc = dxc_all[rows] if dxc_all is not None else None

        inner, dinner = _mlp2(xc, dxc, wview, f"{prefix}.{tag}.inner")
        cat = np.concatenate([xc, inner], axis=1)
        dcat = None
        if dxc is not None or dinner is not None:
            dcat = np.concatenate(
                [
                    dxc if dxc is not None else np.zeros_like(xc),
                    dinner if dinner is not None else np.zeros_like(inner),
                ],
                axis=1,
            )
        gate, dgate = _mlp2(cat, dcat, wview, f"{prefix}.{tag}.outer")

        mod = xc * gate
        if dxc is not None or dgate is not None:
            dmod = (dxc if dxc is not None else 0.0) * gate + xc * (dgate if dgate is not None else 0.0)
        else:
            dmod = None
        val, tan = _add(xf, dxf, mod, dmod)
        out = out.with_dim(dim, val, tan)
    return out


def _project_level(features: SimplexFeatureSet, wview: _WeightView, level: int, dtype) -> LevelState:
    arrays = {0: features.vertices, 1: features.edges, 2: features.triangles}
    values: dict[int, np.ndarray] = {}
    tangents: dict[int, np.ndarray | None] = {}
    for dim, tag in _DIM_TAGS.items():
        x = np.asarray(arrays[dim], dtype=dtype)
        values[dim], tangents[dim] = _linear(x, None, wview, f"proj.L{level}.{tag}")
    return LevelState(values=values, tangents=tangents)


@dataclass
class ForwardResult:
    atom_embeddings: np.ndarray    # (N, D) at the finest level
    polymer_embedding: np.ndarray  # (D,)
    prediction: float
    prediction_tangent: float | None = None


def hsmp_forward(
    features: list[SimplexFeatureSet],
    filtration: Filtration,
    weights: ModelWeights,
    tangent_name: str | None = None,
    tangent_direction: np.ndarray | None = None,
) -> ForwardResult:
    """Full encoder pass: coarse-to-fine blocks, refinement, pooling, head."""
    config = weights.config
    if len(features) != config.n_levels or len(filtration.levels) != config.n_levels:
        raise ValidationError("feature/filtration level count does not match model config")
    for fs in features:
        if fs.schema_version != config.schema_version:
            raise VersionMismatchError(
                f"feature schema {fs.schema_version!r} does not match weights schema {config.schema_version!r}"
            )
    dtype = np.float32 if config.dtype == "f32" else np.float64
    wview = _WeightView(weights, tangent_name, tangent_direction)

    state: LevelState | None = None
    for li in range(config.n_levels - 1, -1, -1):
        level = li + 1
        complex_ = filtration.complex_at(li)
        init = _project_level(features[li], wview, level, dtype)
        if state is None:
            state = init
        else:
            coarse_complex = filtration.complex_at(li + 1)
            state = cross_scale_refine(init, state, complex_, coarse_complex, wview, f"csr.L{li + 2}to{level}")
        if config.edge_layers[li]:
            state = multi_head_block(state, complex_, 1, config.edge_layers[li], wview, f"mp.L{level}.edge")
        if config.node_layers[li]:
            state = multi_head_block(state, complex_, 0, config.node_layers[li], wview, f"mp.L{level}.node")

    assert state is not None
    z, dz = state.get(0)
    pooled, dpooled = pooled_mean(z, dz)
    y, dy = _mlp2(pooled[None, :], dpooled[None, :] if dpooled is not None else None, wview, "head")
    return ForwardResult(
        atom_embeddings=z,
        polymer_embedding=pooled,
        prediction=float(y[0, 0]),
        prediction_tangent=float(dy[0, 0]) if dy is not None else None,
    )
