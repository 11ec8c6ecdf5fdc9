"""Executable models built from a LayerGraph."""

from __future__ import annotations

import numpy as np

from ..filters import binomial_kernel
from ..graphlint import LayerGraph, LayerNode, infer_shapes
from . import ops

PARAM_NAMES = {"conv": ("weight", "bias"), "linear": ("weight", "bias"), "norm": ("gamma", "beta")}


class Model:
    """A LayerGraph plus its trainable parameters and fixed blur kernels."""

    def __init__(self, graph: LayerGraph, params: dict[str, dict[str, np.ndarray]] | None = None, rng=None):
        self.graph = graph
        self.shapes = infer_shapes(graph)
        self.order = graph.topological_order()
        self.fixed_kernels = {
            nid: binomial_kernel(n.kernel_size) if n.kernel_size >= 3 else None
            for nid, n in graph.nodes.items()
            if n.kind == "blur"
        }
        if params is None:
            params = self._init_params(np.random.default_rng(rng))
        self.params = params
        self._check_params()

    def _in_channels(self, nid: str) -> int:
        return self.shapes[self.graph.predecessors(nid)[0]][0]

    def param_shapes(self) -> dict[str, dict[str, tuple[int, ...]]]:
        shapes = {}
        for nid in self.order:
            node = self.graph[nid]
            if not node.trainable or node.kind not in PARAM_NAMES:
                continue
            cin, cout = self._in_channels(nid), self.shapes[nid][0]
            if node.kind == "conv":
                k = node.kernel_size
                shapes[nid] = {"weight": (cout, cin, k, k), "bias": (cout,)}
            elif node.kind == "linear":
                shapes[nid] = {"weight": (cout, cin), "bias": (cout,)}
            else:
                shapes[nid] = {"gamma": (cout,), "beta": (cout,)}
        return shapes

    def _init_params(self, rng: np.random.Generator):
        params = {}
        for nid, shapes in self.param_shapes().items():
            kind = self.graph[nid].kind
            if kind == "norm":
                params[nid] = {"gamma": np.ones(shapes["gamma"]), "beta": np.zeros(shapes["beta"])}
                continue
            wshape = shapes["weight"]
            fan_in = int(np.prod(wshape[1:]))
            gain = 2.0 if kind == "conv" else 1.0
            params[nid] = {
                "weight": rng.normal(0.0, np.sqrt(gain / fan_in), size=wshape),
                "bias": np.zeros(shapes["bias"]),
            }
        return params

    def _check_params(self):
        want = self.param_shapes()
        if set(want) != set(self.params):
            raise ValueError(f"parameter nodes {sorted(self.params)} do not match graph {sorted(want)}")
        for nid, shapes in want.items():
            for name, shape in shapes.items():
                got = self.params[nid][name].shape
                if got != shape:
                    raise ValueError(f"{nid}.{name}: expected shape {shape}, got {got}")

    def parameter_count(self) -> int:
        return sum(p.size for ps in self.params.values() for p in ps.values())

    def parameter_vector(self) -> np.ndarray:
        chunks = [self.params[nid][name].ravel() for nid, name in self.param_keys()]
        return np.concatenate(chunks) if chunks else np.zeros(0)

    def param_keys(self) -> list[tuple[str, str]]:
        return [(nid, name) for nid in self.order if nid in self.params for name in PARAM_NAMES[self.graph[nid].kind]]

    def copy(self) -> "Model":
        return Model(self.graph, {n: {k: v.copy() for k, v in ps.items()} for n, ps in self.params.items()})

    def forward(self, x, keep: bool = False):
        """Logits for a batch ``(B, C, H, W)``.

        With ``keep=True`` returns ``(logits, tape)`` where the tape holds every
        node output and the backward caches.
        """
        x = np.asarray(x, dtype=float)
        outs: dict[str, np.ndarray] = {}
        caches: dict[str, object] = {}
        for nid in self.order:
            node: LayerNode = self.graph[nid]
            preds = self.graph.predecessors(nid)
            src = outs[preds[0]] if preds else x
            kind = node.kind
            if kind in ("input", "output"):
                y = src
            elif kind == "conv":
                p = self.params.get(nid)
                if p is None:
                    raise ValueError(f"conv node {nid} has no parameters (fixed convs are not supported)")
                y, caches[nid] = ops.conv2d_forward(src, p["weight"], p["bias"], node.stride)
            elif kind == "blur":
                kern = self.fixed_kernels[nid]
                if kern is None:
                    y = src[:, :, :: node.stride, :: node.stride]
                    caches[nid] = None
                else:
                    y, caches[nid] = ops.blur_forward(src, kern, node.stride)
            elif kind == "maxpool":
                y, caches[nid] = ops.maxpool_forward(src, node.kernel_size, node.stride)
            elif kind == "activation":
                y, caches[nid] = ops.activation_forward(src, node.activation)
            elif kind == "norm":
                p = self.params[nid]
                y, caches[nid] = ops.norm_forward(src, p["gamma"], p["beta"])
            elif kind == "add":
                y = src + outs[preds[1]]
            elif kind == "gap":
                y, caches[nid] = ops.gap_forward(src)
            elif kind == "linear":
                p = self.params[nid]
                y, caches[nid] = ops.linear_forward(src, p["weight"], p["bias"])
            else:
                raise ValueError(f"cannot execute node kind {kind!r}")
            outs[nid] = y
        logits = outs[self.graph.output_id]
        if keep:
            return logits, {"outputs": outs, "caches": caches, "input_shape": x.shape}
        return logits

    def backward(self, dlogits, tape):
        """Parameter gradients (same layout as ``params``) and the input gradient."""
        caches = tape["caches"]
        grads_in: dict[str, np.ndarray] = {self.graph.output_id: dlogits}
        pgrads: dict[str, dict[str, np.ndarray]] = {}
        dx_input = None
        for nid in reversed(self.order):
            g = grads_in.pop(nid, None)
            if g is None:
                continue
            node = self.graph[nid]
            kind = node.kind
            preds = self.graph.predecessors(nid)
            if kind == "input":
                dx_input = g
                continue
            if kind == "output":
                d = g
            elif kind == "conv":
                d, dw, db = ops.conv2d_backward(g, caches[nid])
                pgrads[nid] = {"weight": dw, "bias": db}
            elif kind == "blur":
                if caches[nid] is None:
                    shape = tape["outputs"][preds[0]].shape
                    d = np.zeros(shape)
                    d[:, :, :: node.stride, :: node.stride] = g
                else:
                    d = ops.blur_backward(g, caches[nid])
            elif kind == "maxpool":
                d = ops.maxpool_backward(g, caches[nid])
            elif kind == "activation":
                d = ops.activation_backward(g, caches[nid])
            elif kind == "norm":
                d, dgamma, dbeta = ops.norm_backward(g, caches[nid])
                pgrads[nid] = {"gamma": dgamma, "beta": dbeta}
            elif kind == "add":
                for p in preds:
                    grads_in[p] = grads_in[p] + g if p in grads_in else g
                continue
            elif kind == "gap":
                d = ops.gap_backward(g, caches[nid])
            elif kind == "linear":
                d, dw, db = ops.linear_backward(g, caches[nid])
                pgrads[nid] = {"weight": dw, "bias": db}
            p = preds[0]
            grads_in[p] = grads_in[p] + d if p in grads_in else d
        return pgrads, dx_input

    def predict(self, x, batch_size: int = 250) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = [self.forward(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
        return np.concatenate(out, axis=0)


def micro_resnet(
    n_classes: int = 10,
    in_channels: int = 1,
    size: int = 32,
    widths: tuple[int, int, int] = (16, 32, 64),
) -> LayerGraph:
    """Stem 7x7/2 conv, 3x3/2 max-pool, two strided bottleneck stages, pooled linear head."""
    stem, w1, w2 = widths
    nodes = [
        LayerNode("input", "input", channels=in_channels, size=size),
        LayerNode("conv1", "conv", kernel_size=7, stride=2, trainable=True, channels=stem),
        LayerNode("conv1_norm", "norm", trainable=True),
        LayerNode("conv1_relu", "activation", activation="relu"),
        LayerNode("maxpool", "maxpool", kernel_size=3, stride=2),
    ]
    edges = [("input", "conv1"), ("conv1", "conv1_norm"), ("conv1_norm", "conv1_relu"), ("conv1_relu", "maxpool")]
    prev = "maxpool"
    for name, mid, out in (("stage1", w1 // 2, w1), ("stage2", w2 // 2, w2)):
        nodes += [
            LayerNode(f"{name}_conv_a", "conv", kernel_size=1, trainable=True, channels=mid),
            LayerNode(f"{name}_norm_a", "norm", trainable=True),
            LayerNode(f"{name}_relu_a", "activation", activation="relu"),
            LayerNode(f"{name}_conv_b", "conv", kernel_size=3, stride=2, trainable=True, channels=mid),
            LayerNode(f"{name}_norm_b", "norm", trainable=True),
            LayerNode(f"{name}_relu_b", "activation", activation="relu"),
            LayerNode(f"{name}_conv_c", "conv", kernel_size=1, trainable=True, channels=out),
            LayerNode(f"{name}_norm_c", "norm", trainable=True),
            LayerNode(f"{name}_skip", "conv", kernel_size=1, stride=2, trainable=True, channels=out),
            LayerNode(f"{name}_skip_norm", "norm", trainable=True),
            LayerNode(f"{name}_add", "add"),
            LayerNode(f"{name}_relu", "activation", activation="relu"),
        ]
        chain = ["conv_a", "norm_a", "relu_a", "conv_b", "norm_b", "relu_b", "conv_c", "norm_c", "add", "relu"]
        edges.append((prev, f"{name}_conv_a"))
        edges += [(f"{name}_{a}", f"{name}_{b}") for a, b in zip(chain, chain[1:])]
        edges += [(prev, f"{name}_skip"), (f"{name}_skip", f"{name}_skip_norm"), (f"{name}_skip_norm", f"{name}_add")]
        prev = f"{name}_relu"
    nodes += [
        LayerNode("gap", "gap"),
        LayerNode("fc", "linear", trainable=True, channels=n_classes),
        LayerNode("output", "output"),
    ]
    edges += [(prev, "gap"), ("gap", "fc"), ("fc", "output")]
    return LayerGraph(nodes, edges)
