import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aliasnet.graphlint import (
    FIXTURES,
    POLICIES,
    VARIANTS,
    GraphError,
    LayerGraph,
    LayerNode,
    RewriteError,
    capacity_check,
    filter_support,
    find_critical_paths,
    infer_shapes,
    lint,
    load_fixture,
    parameter_count,
    parse_graph,
    resolve_graph,
    rewrite,
    rewrite_targets,
)
from aliasnet.micronn.model import micro_resnet

# Hand-traced critical paths: (subsample node, path, boundary kind, boundary node, has capacity)
GOLDEN = {
    "resnet_block": [
        ("skip", ["skip"], "nonlinearity", "relu", False),
        ("conv_b", ["conv_a", "conv_b"], "nonlinearity", "relu", True),
    ],
    "resnet_stem": [
        ("conv1", ["conv1"], "input", "input", True),
        ("maxpool", ["maxpool"], "nonlinearity", "relu1", False),
    ],
    "efficientnet_block": [
        ("stem", ["stem"], "input", "input", True),
        ("dw", ["dw"], "nonlinearity", "expand_act", True),
    ],
    "micro_resnet": [
        ("conv1", ["conv1"], "input", "input", True),
        ("maxpool", ["maxpool"], "nonlinearity", "conv1_relu", False),
        ("stage1_skip", ["stage1_skip"], "nonlinearity", "maxpool", False),
        ("stage1_conv_b", ["stage1_conv_b"], "nonlinearity", "stage1_relu_a", True),
        ("stage2_skip", ["stage2_skip"], "nonlinearity", "stage1_relu", False),
        ("stage2_conv_b", ["stage2_conv_b"], "nonlinearity", "stage2_relu_a", True),
    ],
}
GOLDEN_VIOLATIONS = {
    "resnet_block": ["skip"],
    "resnet_stem": ["maxpool"],
    "efficientnet_block": [],
    "micro_resnet": ["maxpool", "stage1_skip", "stage2_skip"],
}


def chain(*specs, size=16, channels=4):
    """Linear graph input -> specs... -> output; each spec is a LayerNode kwargs dict."""
    nodes = [LayerNode("in", "input", channels=channels, size=size)]
    for i, s in enumerate(specs):
        nodes.append(LayerNode.from_dict({"id": f"n{i}", **s}))
    nodes.append(LayerNode("out", "output"))
    ids = [n.id for n in nodes]
    return LayerGraph(nodes, list(zip(ids, ids[1:])))


@pytest.mark.parametrize("name", ["resnet_block", "resnet_stem", "efficientnet_block", "micro_resnet"])
def test_critical_paths_match_golden(name):
    report = lint(load_fixture(name))
    got = [(p.subsample_node, list(p.path), p.boundary_kind, p.boundary_node, p.has_capacity) for p in report.paths]
    assert got == GOLDEN[name]
    assert report.to_dict()["violations"] == GOLDEN_VIOLATIONS[name]
    assert [r["node"] for r in report.recommendations] == GOLDEN_VIOLATIONS[name]


def test_micro_resnet_fixture_matches_builder():
    assert load_fixture("micro_resnet") == micro_resnet()


@pytest.mark.parametrize("name", ["resnet_block", "resnet_stem", "micro_resnet"])
@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("k", [3, 5, 7])
def test_rewrite_clears_violations_and_keeps_parameters(name, variant, k):
    g = load_fixture(name)
    new = rewrite(g, variant, k)
    assert lint(new).violations == []
    assert parameter_count(new) == parameter_count(g)
    assert infer_shapes(new)[new.output_id] == infer_shapes(g)[g.output_id]
    blurs = [n for n in new.nodes.values() if n.kind == "blur"]
    assert blurs and all(b.kernel_size == k and not b.trainable for b in blurs)


def test_efficientnet_has_nothing_to_fix():
    with pytest.raises(RewriteError):
        rewrite(load_fixture("efficientnet_block"), "post")


def test_post_structure_on_resnet_block():
    new = rewrite(load_fixture("resnet_block"), "post", 3)
    assert new["skip"].stride == 1
    assert new["skip_blur"].stride == 2
    assert new.successors("skip") == ["skip_blur"]
    assert new.successors("skip_blur") == ["add"]


def test_variant_placements():
    g = load_fixture("resnet_block")
    pre = rewrite(g, "pre")
    assert pre["skip"].stride == 2 and pre["skip_preblur"].stride == 1
    assert pre.successors("skip_preblur") == ["skip"] and pre.predecessors("skip_preblur") == ["relu"]
    erf = rewrite(g, "erf")
    assert erf["skip"].stride == 1 and erf["skip_preblur"].stride == 2
    pp = rewrite(g, "prepost")
    assert (pp["skip_preblur"].stride, pp["skip"].stride, pp["skip_blur"].stride) == (1, 1, 2)
    lead = rewrite(g, "prepost", strided_lead=True)
    assert (lead["skip_preblur"].stride, lead["skip"].stride, lead["skip_blur"].stride) == (2, 1, 1)


def test_zhang_goes_after_the_activation():
    g = micro_resnet()
    z = rewrite(g, "zhang", policy="all_strided")
    # conv_b -> norm_b -> relu_b -> blur
    assert z.predecessors("stage1_conv_b_blur") == ["stage1_relu_b"]
    # skip joins before any activation: blur directly after the conv
    assert z.predecessors("stage1_skip_blur") == ["stage1_skip"]
    # max-pool keeps the post placement
    assert z.predecessors("maxpool_blur") == ["maxpool"]
    assert lint(z).violations == []


def test_policies_on_micro_resnet():
    g = micro_resnet()
    assert rewrite_targets(g, "violations_only") == ["maxpool", "stage1_skip", "stage2_skip"]
    assert rewrite_targets(g, "all_strided") == ["maxpool", "stage1_skip", "stage1_conv_b", "stage2_skip", "stage2_conv_b"]
    assert rewrite_targets(g, "conv1_too") == ["conv1", "maxpool", "stage1_skip", "stage1_conv_b", "stage2_skip", "stage2_conv_b"]
    with pytest.raises(RewriteError):
        rewrite_targets(g, "everything")


def test_rewrite_is_idempotent_by_refusal():
    g = rewrite(micro_resnet(), "post", policy="conv1_too")
    for policy in POLICIES:
        assert rewrite_targets(g, policy) == []
        with pytest.raises(RewriteError):
            rewrite(g, "post", policy=policy)


def test_rewrite_argument_checks():
    g = load_fixture("resnet_block")
    with pytest.raises(RewriteError):
        rewrite(g, "median")
    with pytest.raises(RewriteError):
        rewrite(g, "post", kernel_size=4)


def test_capacity_rules():
    g = chain({"kind": "conv", "kernel_size": 1, "stride": 2})
    (p,) = find_critical_paths(g)
    assert not p.has_capacity and p.boundary_kind == "input"
    g = chain({"kind": "conv", "kernel_size": 1}, {"kind": "norm"}, {"kind": "conv", "kernel_size": 3, "stride": 2})
    (p,) = find_critical_paths(g)
    assert p.path == ("n0", "n1", "n2") and p.has_capacity
    assert filter_support(g, p.path) == 3
    # a 2x2 kernel is the smallest with capacity
    assert capacity_check(["n0"], chain({"kind": "conv", "kernel_size": 2})) is True
    # a fixed blur counts unless told otherwise
    g = chain({"kind": "blur", "kernel_size": 3}, {"kind": "conv", "kernel_size": 1, "stride": 2})
    (p,) = find_critical_paths(g)
    assert p.has_capacity
    assert not capacity_check(p, g, count_fixed=False)


def test_parameter_count_by_hand():
    g = load_fixture("resnet_block")
    # conv_a 1x1 64->64, conv_b 3x3 64->64, conv_c 1x1 64->256, skip 1x1 64->256, all with bias
    want = (64 * 64 + 64) + (9 * 64 * 64 + 64) + (64 * 256 + 256) + (64 * 256 + 256)
    assert parameter_count(g) == want
    assert parameter_count(micro_resnet()) == 20266


def test_json_round_trip_for_all_fixtures():
    for name in FIXTURES:
        g = load_fixture(name)
        assert parse_graph(g.to_json()) == g
        assert resolve_graph(name) == g


@pytest.mark.parametrize(
    "doc,needle",
    [
        ({"nodes": [], "edges": []}, "exactly one input"),
        ({"nodes": [{"id": "a", "kind": "input"}, {"id": "a", "kind": "output"}], "edges": []}, "duplicate"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "o", "kind": "output"}], "edges": [["i", "x"]]}, "missing node"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "o", "kind": "output"}, {"id": "p", "kind": "pool"}], "edges": []}, "unknown kind"),
        ({"nodes": [{"id": "i", "kind": "input", "colour": 1}], "edges": []}, "unknown node fields"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "a", "kind": "add"}, {"id": "o", "kind": "output"}],
          "edges": [["i", "a"], ["a", "o"]]}, "needs 2 predecessor"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "r", "kind": "norm", "stride": 2}], "edges": []}, "cannot subsample"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "b", "kind": "blur", "trainable": True}], "edges": []}, "fixed"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "x", "kind": "activation"}], "edges": []}, "needs an 'activation'"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "o", "kind": "output"}, {"id": "n", "kind": "norm"}],
          "edges": [["i", "o"], ["n", "n"]]}, "cycle"),
        ({"nodes": [{"id": "i", "kind": "input"}, {"id": "a", "kind": "norm"}, {"id": "b", "kind": "norm"},
                    {"id": "o", "kind": "output"}],
          "edges": [["i", "o"], ["a", "b"], ["b", "a"]]}, "cycle"),
        ("{not json", "not valid JSON"),
        ({"nodes": {}}, "'nodes' and 'edges'"),
    ],
)
def test_malformed_graphs_are_rejected(doc, needle):
    with pytest.raises(GraphError, match=needle):
        parse_graph(doc if isinstance(doc, str) else json.dumps(doc))


def test_output_cannot_feed_anything():
    nodes = [LayerNode("i", "input"), LayerNode("o", "output"), LayerNode("n", "norm")]
    with pytest.raises(GraphError, match="successors"):
        LayerGraph(nodes, [("i", "o"), ("o", "n")])


def test_cycle_error_names_a_node():
    nodes = [LayerNode("i", "input"), LayerNode("a", "add"), LayerNode("b", "norm"), LayerNode("o", "output")]
    with pytest.raises(GraphError) as info:
        LayerGraph(nodes, [("i", "a"), ("a", "b"), ("b", "a"), ("b", "o")])
    assert info.value.node in {"a", "b"}


def test_shape_mismatch_at_join():
    nodes = [
        LayerNode("i", "input", channels=4, size=8),
        LayerNode("c", "conv", kernel_size=1, stride=2, channels=4),
        LayerNode("a", "add"),
        LayerNode("o", "output"),
    ]
    g = LayerGraph(nodes, [("i", "c"), ("c", "a"), ("i", "a"), ("a", "o")])
    with pytest.raises(GraphError, match="disagree"):
        infer_shapes(g)


layer = st.one_of(
    st.builds(lambda k, s: {"kind": "conv", "kernel_size": k, "stride": s}, st.sampled_from([1, 3, 5]), st.sampled_from([1, 2])),
    st.just({"kind": "norm"}),
    st.builds(lambda a: {"kind": "activation", "activation": a}, st.sampled_from(["relu", "gelu", "swish"])),
    st.builds(lambda s: {"kind": "maxpool", "kernel_size": 3, "stride": s}, st.sampled_from([1, 2])),
)


@settings(max_examples=120, deadline=None)
@given(st.lists(layer, min_size=1, max_size=8), st.sampled_from(VARIANTS), st.sampled_from(POLICIES), st.sampled_from([3, 5, 7]))
def test_rewrite_properties_on_random_chains(specs, variant, policy, k):
    g = chain(*specs, size=32)
    targets = rewrite_targets(g, policy)
    if not targets:
        with pytest.raises(RewriteError):
            rewrite(g, variant, k, policy)
        return
    new = rewrite(g, variant, k, policy)
    assert lint(new).violations == []
    assert parameter_count(new) == parameter_count(g)
    assert infer_shapes(new)[new.output_id] == infer_shapes(g)[g.output_id]
    assert rewrite_targets(new, policy) == []
    assert parse_graph(new.to_json()) == new
