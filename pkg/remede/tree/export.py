# remede/tree/export.py
import io
import json
from typing import Any, Dict, Optional

import numpy as np

from remede.autodiff.ops import round_half_away, sigmoid_np
from remede.tree.prune import PrunedNode, PrunedTree

FORMATS = ("dot", "json")


def feature_name(k: int, n_x: Optional[int]) -> str:
    """Input features are x_i, memory features m_i (both 0-based)."""
    if n_x is None or k < n_x:
        return f"x_{k}"
    return f"m_{k - n_x}"


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def leaf_summary(node: PrunedNode, class_values) -> Dict[str, Any]:
    p = node.payload
    out: Dict[str, Any] = {}
    if "class_logits" in p:
        out["class"] = int(class_values[int(np.argmax(p["class_logits"]))])
    if "gate_logits" in p:
        out["gate"] = [int(b) for b in round_half_away(sigmoid_np(p["gate_logits"]))]
    if "input_weights" in p:
        out["W"] = np.asarray(p["input_weights"]).tolist()
    return out


def _leaf_label(node: PrunedNode, class_values) -> str:
    s = leaf_summary(node, class_values)
    lines = [f"leaf {','.join(str(l) for l in node.merged)}"]
    if "class" in s:
        lines.append(f"class = {s['class']}")
    if "gate" in s:
        lines.append("gate = " + "".join(str(b) for b in s["gate"]))
    for i, row in enumerate(s.get("W", [])):
        lines.append(f"W[{i}] = [" + ", ".join(_fmt(w) for w in row) + "]")
    return "\\n".join(lines)


def to_dot(pruned: PrunedTree) -> str:
    out = io.StringIO()
    out.write("digraph Tree {\n")
    out.write('node [shape=box, style="rounded", fontname="helvetica"] ;\n')
    out.write('edge [fontname="helvetica"] ;\n')

    def recurse(node: PrunedNode, parent: Optional[int], is_right: bool, cond: str):
        if node.is_leaf:
            out.write('%d [label="%s", style="rounded,filled", fillcolor="#eeeeee"] ;\n'
                      % (node.node_id, _leaf_label(node, pruned.class_values)))
        else:
            out.write('%d [label="%s ≥ %s"] ;\n'
                      % (node.node_id, feature_name(node.feature, pruned.n_x), _fmt(node.threshold)))
        if parent is not None:
            tag = "True" if is_right else "False"
            out.write('%d -> %d [label="%s (%s)"] ;\n' % (parent, node.node_id, tag, cond))
        if not node.is_leaf:
            tau = _fmt(node.threshold)
            recurse(node.left, node.node_id, False, f"< {tau}")
            recurse(node.right, node.node_id, True, f"≥ {tau}")

    recurse(pruned.root, None, False, "")
    out.write("}\n")
    return out.getvalue()


def _node_dict(node: PrunedNode, pruned: PrunedTree) -> Dict[str, Any]:
    if node.is_leaf:
        d = {"id": node.node_id, "leaf": node.leaf, "merged": list(node.merged)}
        d.update(leaf_summary(node, pruned.class_values))
        d["payload"] = {k: np.asarray(v).tolist() for k, v in node.payload.items()}
        return d
    return {
        "id": node.node_id,
        "feature": node.feature,
        "feature_name": feature_name(node.feature, pruned.n_x),
        "threshold": node.threshold,
        "left": _node_dict(node.left, pruned),
        "right": _node_dict(node.right, pruned),
    }


def to_json(pruned: PrunedTree) -> str:
    doc = {
        "depth": pruned.depth,
        "n_features": pruned.n_features,
        "n_x": pruned.n_x,
        "class_values": list(pruned.class_values),
        "root": _node_dict(pruned.root, pruned),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)


def export_graph(pruned: PrunedTree, format: str = "dot") -> str:
    if format == "dot":
        return to_dot(pruned)
    if format == "json":
        return to_json(pruned)
    raise ValueError(f"unknown export format {format!r}; expected one of {FORMATS}")


def _node_from_dict(d: Dict[str, Any]) -> PrunedNode:
    if "leaf" in d:
        return PrunedNode(
            node_id=d["id"],
            leaf=d["leaf"],
            merged=list(d.get("merged", [d["leaf"]])),
            payload={k: np.asarray(v, dtype=np.float64) for k, v in d.get("payload", {}).items()},
        )
    return PrunedNode(
        node_id=d["id"],
        feature=d["feature"],
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def tree_from_json(text: str) -> PrunedTree:
    doc = json.loads(text)
    return PrunedTree(
        root=_node_from_dict(doc["root"]),
        depth=doc["depth"],
        n_features=doc["n_features"],
        n_x=doc.get("n_x"),
        class_values=tuple(doc.get("class_values", (-1, 0, 1))),
    )
