"""Layer-graph IR, aliasing critical-path lint, and fixed-blur placement rewrites.

A critical path runs backwards from a subsampling node (stride >= 2) to the
nearest nonlinearity, skip join, or the network input.  Only the operations
on that path can low-pass the signal before it is subsampled, so a path whose
trainable filters are all 1x1 cannot learn to prevent aliasing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

NODE_KINDS = ("input", "output", "conv", "maxpool", "activation", "add", "blur", "norm", "gap", "linear")
SPATIAL_KINDS = ("conv", "maxpool", "blur")
NONLINEAR_KINDS = ("activation", "maxpool")
TRAINABLE_KINDS = ("conv", "norm", "linear")

VARIANTS = ("pre", "post", "prepost", "erf", "zhang")
POLICIES = ("violations_only", "all_strided", "conv1_too")
BLUR_SIZES = (3, 5, 7)


class GraphError(ValueError):
    """Invalid graph document or structure; ``node`` names the offender when known."""

    def __init__(self, reason: str, node: str | None = None):
        self.node = node
        self.reason = reason
        super().__init__(f"{node}: {reason}" if node else reason)


class RewriteError(ValueError):
    pass


@dataclass(frozen=True)
class LayerNode:
    id: str
    kind: str
    kernel_size: int = 1
    stride: int = 1
    trainable: bool = False
    activation: str | None = None
    channels: int | None = None
    size: int | None = None

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"unknown kind {self.kind!r}", self.id)
        if self.stride < 1:
            raise GraphError("stride must be >= 1", self.id)
        if self.kernel_size < 1:
            raise GraphError("kernel_size must be >= 1", self.id)
        if self.stride > 1 and self.kind not in SPATIAL_KINDS:
            raise GraphError(f"{self.kind} nodes cannot subsample", self.id)
        if self.kind == "blur" and self.trainable:
            raise GraphError("blur nodes are fixed and cannot be trainable", self.id)
        if self.kind == "activation" and not self.activation:
            raise GraphError("activation node needs an 'activation' kind", self.id)

    @classmethod
    def from_dict(cls, d: dict) -> "LayerNode":
        if "id" not in d or "kind" not in d:
            raise GraphError(f"node entry {d!r} needs 'id' and 'kind'")
        nid = str(d["id"])
        known = {"id", "kind", "kernel_size", "stride", "trainable", "activation", "channels", "size"}
        extra = set(d) - known
        if extra:
            raise GraphError(f"unknown node fields {sorted(extra)}", nid)
        kind = d["kind"]
        try:
            return cls(
                id=nid,
                kind=kind,
                kernel_size=int(d.get("kernel_size", 1)),
                stride=int(d.get("stride", 1)),
                trainable=bool(d.get("trainable", kind in TRAINABLE_KINDS)),
                activation=d.get("activation"),
                channels=None if d.get("channels") is None else int(d["channels"]),
                size=None if d.get("size") is None else int(d["size"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(str(exc), nid) from None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "trainable": self.trainable,
        }
        for key in ("activation", "channels", "size"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


class LayerGraph:
    """Validated single-input, single-output DAG of layer nodes.

    Treat instances as immutable; rewrites build new graphs.
    """

    def __init__(self, nodes: Iterable[LayerNode], edges: Iterable[tuple[str, str]]):
        self.nodes: dict[str, LayerNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise GraphError("duplicate node id", node.id)
            self.nodes[node.id] = node
        self.edges: tuple[tuple[str, str], ...] = tuple((str(a), str(b)) for a, b in edges)
        self._preds: dict[str, list[str]] = {n: [] for n in self.nodes}
        self._succs: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            for end in (a, b):
                if end not in self.nodes:
                    raise GraphError(f"edge {a} -> {b} references a missing node", end)
            self._succs[a].append(b)
            self._preds[b].append(a)
        self._validate()
        self._order = self._topological_order()

    def _validate(self) -> None:
        inputs = [n.id for n in self.nodes.values() if n.kind == "input"]
        outputs = [n.id for n in self.nodes.values() if n.kind == "output"]
        if len(inputs) != 1:
            raise GraphError(f"graph needs exactly one input node, found {len(inputs)}")
        if len(outputs) != 1:
            raise GraphError(f"graph needs exactly one output node, found {len(outputs)}")
        self.input_id, self.output_id = inputs[0], outputs[0]
        self._check_acyclic()
        for nid, node in self.nodes.items():
            n_in = len(self._preds[nid])
            want = 0 if node.kind == "input" else 2 if node.kind == "add" else 1
            if n_in != want:
                raise GraphError(f"{node.kind} node needs {want} predecessor(s), has {n_in}", nid)
        if self._succs[self.output_id]:
            raise GraphError("output node cannot have successors", self.output_id)
        seen = {self.input_id}
        stack = [self.input_id]
        while stack:
            for nxt in self._succs[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        for nid in self.nodes:
            if nid not in seen:
                raise GraphError("node is not reachable from the input", nid)

    def _check_acyclic(self) -> None:
        state = dict.fromkeys(self.nodes, 0)
        for root in self.nodes:
            if state[root]:
                continue
            state[root] = 1
            stack = [(root, iter(self._succs[root]))]
            while stack:
                nid, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[nid] = 2
                    stack.pop()
                elif state[nxt] == 1:
                    raise GraphError(f"cycle through back edge {nid} -> {nxt}", nid)
                elif state[nxt] == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(self._succs[nxt])))

    def _topological_order(self) -> list[str]:
        indeg = {n: len(p) for n, p in self._preds.items()}
        ready = [n for n in self.nodes if indeg[n] == 0]
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for nxt in self._succs[nid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        return order

    def predecessors(self, nid: str) -> list[str]:
        return list(self._preds[nid])

    def successors(self, nid: str) -> list[str]:
        return list(self._succs[nid])

    def topological_order(self) -> list[str]:
        return list(self._order)

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, nid: str) -> LayerNode:
        return self.nodes[nid]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayerGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def parse_graph(text: str | dict) -> LayerGraph:
    """Parse and validate a graph document ``{"nodes": [...], "edges": [[from, to], ...]}``."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphError(f"not valid JSON: {exc}") from None
    else:
        doc = text
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list) or not isinstance(doc.get("edges"), list):
        raise GraphError("document needs 'nodes' and 'edges' lists")
    nodes = [LayerNode.from_dict(d) for d in doc["nodes"]]
    edges = []
    for e in doc["edges"]:
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise GraphError(f"edge {e!r} must be a [from, to] pair")
        edges.append((str(e[0]), str(e[1])))
    return LayerGraph(nodes, edges)


def load_graph(path: str | Path) -> LayerGraph:
    return parse_graph(Path(path).read_text())


FIXTURES = ("resnet_block", "resnet_stem", "efficientnet_block", "micro_resnet")


def fixture_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; bundled: {FIXTURES}")
    return Path(str(resources.files("aliasnet") / "fixtures" / f"{stem}.json"))


def load_fixture(name: str) -> LayerGraph:
    return load_graph(fixture_path(name))


def resolve_graph(name_or_path: str) -> LayerGraph:
    """Load a bundled fixture by name, or a graph JSON file by path."""
    p = Path(name_or_path)
    if p.is_file():
        return load_graph(p)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in FIXTURES:
        return load_fixture(stem)
    raise FileNotFoundError(2, f"no graph file or bundled fixture named {name_or_path!r}", name_or_path)


def _out_size(size: int, k: int, s: int) -> int:
    return (size + 2 * ((k - 1) // 2) - k) // s + 1


def infer_shapes(g: LayerGraph) -> dict[str, tuple[int, ...]]:
    """Per-node output shape: ``(C, H, W)`` for spatial maps, ``(C,)`` after pooling."""
    shapes: dict[str, tuple[int, ...]] = {}
    for nid in g.topological_order():
        node = g[nid]
        preds = g.predecessors(nid)
        if node.kind == "input":
            size = node.size or 32
            shapes[nid] = (node.channels or 1, size, size)
            continue
        src = shapes[preds[0]]
        if node.kind == "add":
            other = shapes[preds[1]]
            if src != other:
                raise GraphError(f"add inputs disagree in shape: {src} vs {other}", nid)
            shapes[nid] = src
        elif node.kind in ("conv", "maxpool"):
            if len(src) != 3:
                raise GraphError(f"{node.kind} needs a spatial input", nid)
            c = (node.channels or src[0]) if node.kind == "conv" else src[0]
            shapes[nid] = (c, _out_size(src[1], node.kernel_size, node.stride), _out_size(src[2], node.kernel_size, node.stride))
        elif node.kind == "blur":
            shapes[nid] = (src[0], -(-src[1] // node.stride), -(-src[2] // node.stride))
        elif node.kind == "gap":
            shapes[nid] = (src[0],)
        elif node.kind == "linear":
            shapes[nid] = (node.channels or src[0],)
        else:
            shapes[nid] = src
    return shapes


def parameter_count(g: LayerGraph) -> int:
    """Number of trainable scalars (conv weights + bias, norm affine, linear weights + bias)."""
    shapes = infer_shapes(g)
    total = 0
    for nid, node in g.nodes.items():
        if not node.trainable:
            continue
        cin = shapes[g.predecessors(nid)[0]][0]
        cout = shapes[nid][0]
        if node.kind == "conv":
            total += node.kernel_size**2 * cin * cout + cout
        elif node.kind == "norm":
            total += 2 * cout
        elif node.kind == "linear":
            total += cin * cout + cout
    return total


@dataclass(frozen=True)
class CriticalPath:
    subsample_node: str
    path: tuple[str, ...]
    boundary_kind: str
    boundary_node: str
    has_capacity: bool
    max_trainable_kernel: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["path"] = list(self.path)
        return d


@dataclass
class LintReport:
    paths: list[CriticalPath]
    violations: list[CriticalPath] = field(default_factory=list)
    recommendations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "paths": [p.to_dict() for p in self.paths],
            "violations": [p.subsample_node for p in self.violations],
            "recommendations": self.recommendations,
        }


def _trace(g: LayerGraph, sub: str) -> tuple[list[str], str, str]:
    path = [sub]
    cur = g.predecessors(sub)[0]
    while True:
        kind = g[cur].kind
        if kind in NONLINEAR_KINDS:
            return path, "nonlinearity", cur
        if kind == "add":
            return path, "skip_join", cur
        if kind == "input":
            return path, "input", cur
        path.insert(0, cur)
        cur = g.predecessors(cur)[0]


def filter_support(g: LayerGraph, path: Iterable[str], count_fixed: bool = True) -> int:
    """Spatial support of the linear filters on a path composed together."""
    support = 1
    for nid in path:
        node = g[nid]
        if (node.kind == "conv" and node.trainable) or (count_fixed and node.kind == "blur"):
            support += node.kernel_size - 1
    return support


def capacity_check(p: CriticalPath | Iterable[str], g: LayerGraph, count_fixed: bool = True) -> bool:
    """Can the filters on the path represent a low-pass filter (composed support >= 2)?"""
    ids = p.path if isinstance(p, CriticalPath) else tuple(p)
    return filter_support(g, ids, count_fixed) >= 2


def find_critical_paths(g: LayerGraph, count_fixed: bool = True) -> list[CriticalPath]:
    """One critical path per subsampling node, in topological order."""
    out = []
    for nid in g.topological_order():
        node = g[nid]
        if node.kind not in SPATIAL_KINDS or node.stride < 2:
            continue
        path, boundary_kind, boundary = _trace(g, nid)
        trainable = [g[n].kernel_size for n in path if g[n].kind == "conv" and g[n].trainable]
        out.append(
            CriticalPath(
                subsample_node=nid,
                path=tuple(path),
                boundary_kind=boundary_kind,
                boundary_node=boundary,
                has_capacity=capacity_check(path, g, count_fixed),
                max_trainable_kernel=max(trainable, default=0),
            )
        )
    return out


def lint(g: LayerGraph) -> LintReport:
    paths = find_critical_paths(g)
    violations = [p for p in paths if not p.has_capacity]
    recs = [
        {
            "node": p.subsample_node,
            "variant": "post",
            "action": f"set {p.subsample_node} stride to 1 and follow it with a fixed blur carrying stride {g[p.subsample_node].stride}",
        }
        for p in violations
    ]
    return LintReport(paths, violations, recs)


def rewrite_targets(g: LayerGraph, policy: str = "violations_only") -> list[str]:
    """Strided conv/max-pool nodes a rewrite under ``policy`` would touch.

    Paths that already contain a fixed blur count as anti-aliased and are
    never targeted again.  ``all_strided`` leaves alone the input-fed strided
    conv when it has capacity of its own (the large stem kernel);
    ``conv1_too`` includes it.
    """
    if policy not in POLICIES:
        raise RewriteError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    targets = []
    for p in find_critical_paths(g):
        node = g[p.subsample_node]
        if node.kind not in ("conv", "maxpool"):
            continue
        if any(g[n].kind == "blur" for n in p.path):
            continue
        if policy == "violations_only" and p.has_capacity:
            continue
        if policy == "all_strided" and p.boundary_kind == "input" and p.has_capacity:
            continue
        targets.append(p.subsample_node)
    return targets


class _Builder:
    def __init__(self, g: LayerGraph):
        self.nodes = dict(g.nodes)
        self.edges = [list(e) for e in g.edges]

    def fresh_id(self, base: str) -> str:
        nid, i = base, 1
        while nid in self.nodes:
            i += 1
            nid = f"{base}{i}"
        return nid

    def set_stride(self, nid: str, stride: int) -> None:
        self.nodes[nid] = replace(self.nodes[nid], stride=stride)

    def add_blur(self, base: str, k: int, stride: int) -> str:
        nid = self.fresh_id(base)
        self.nodes[nid] = LayerNode(nid, "blur", kernel_size=k, stride=stride, trainable=False)
        return nid

    def insert_after(self, anchor: str, new: str) -> None:
        for e in self.edges:
            if e[0] == anchor:
                e[0] = new
        self.edges.append([anchor, new])

    def insert_before(self, anchor: str, new: str) -> None:
        for e in self.edges:
            if e[1] == anchor:
                e[1] = new
        self.edges.append([new, anchor])

    def successors(self, nid: str) -> list[str]:
        return [b for a, b in self.edges if a == nid]

    def build(self) -> LayerGraph:
        return LayerGraph(self.nodes.values(), [tuple(e) for e in self.edges])


def _following_activation(b: _Builder, nid: str) -> str | None:
    cur = nid
    while True:
        succ = b.successors(cur)
        if len(succ) != 1:
            return None
        kind = b.nodes[succ[0]].kind
        if kind == "activation":
            return succ[0]
        if kind != "norm":
            return None
        cur = succ[0]


def rewrite(
    g: LayerGraph,
    variant: str = "post",
    kernel_size: int = 3,
    policy: str = "violations_only",
    strided_lead: bool = False,
) -> LayerGraph:
    """Insert fixed binomial blurs around targeted strided ops.

    For a target C with stride s:

    * ``pre``: blur(k, 1) right before C; C keeps stride s.
    * ``post``: C gets stride 1, followed directly by blur(k, s).
    * ``prepost``: blur(k, 1) before C, C at stride 1, blur(k, s) after.  With
      ``strided_lead`` the leading blur carries the stride instead.
    * ``erf``: blur(k, s) before C, C at stride 1.
    * ``zhang``: C at stride 1, blur(k, s) after C's following activation
      (directly after C when no activation follows before a join).

    Fixed blurs add no trainable parameters and every variant keeps the
    output shape.
    """
    if variant not in VARIANTS:
        raise RewriteError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if kernel_size not in BLUR_SIZES:
        raise RewriteError(f"blur size must be one of {BLUR_SIZES}, got {kernel_size}")
    targets = rewrite_targets(g, policy)
    if not targets:
        raise RewriteError(f"no rewrite targets under policy {policy!r}")
    b = _Builder(g)
    k = kernel_size
    for cid in targets:
        s = b.nodes[cid].stride
        if variant == "pre":
            b.insert_before(cid, b.add_blur(f"{cid}_preblur", k, 1))
        elif variant == "post":
            b.set_stride(cid, 1)
            b.insert_after(cid, b.add_blur(f"{cid}_blur", k, s))
        elif variant == "prepost":
            b.set_stride(cid, 1)
            b.insert_before(cid, b.add_blur(f"{cid}_preblur", k, s if strided_lead else 1))
            b.insert_after(cid, b.add_blur(f"{cid}_blur", k, 1 if strided_lead else s))
        elif variant == "erf":
            b.set_stride(cid, 1)
            b.insert_before(cid, b.add_blur(f"{cid}_preblur", k, s))
        else:
            b.set_stride(cid, 1)
            act = None if b.nodes[cid].kind == "maxpool" else _following_activation(b, cid)
            b.insert_after(act or cid, b.add_blur(f"{cid}_blur", k, s))
    return b.build()
