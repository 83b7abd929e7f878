"""Sparse binary feature templates over parser states.

The template set is fixed and versioned (:data:`TEMPLATE_VERSION`);
model files record the version and refuse to load under a different
one.  Exactly 30 keys are emitted per state:

* forms and POS tags of the top 3 stack items and front 3 buffer items
  (``s1.w`` .. ``b3.p``, 12 keys);
* relation label and POS of the leftmost and rightmost attached child
  of the top 2 stack items (``s1.lc.r`` .. ``s2.rc.p``, 8 keys);
* word+tag conjunctions ``s1.wp``, ``s2.wp``, ``b1.wp`` (3 keys);
* pair conjunctions ``s1p_s2p``, ``s1w_s2w``, ``s1p_b1p``, ``s2p_b1p``
  (4 keys);
* triples ``s1p_s2p_b1p`` and ``s1p_lcr_rcr`` (2 keys);
* a constant ``bias`` key.

Positions beyond the stack/buffer and absent children emit the ``NULL``
sentinel.  Vertex 0 has form ``NULL`` and POS ``ROOT``.
"""

from __future__ import annotations

from .conllu import Sentence
from .transition import ParserState

__all__ = ["TEMPLATE_VERSION", "extract_features"]

TEMPLATE_VERSION = "v1"

_NULL = "NULL"


def extract_features(sentence: Sentence, state: ParserState) -> tuple[str, ...]:
    """Active binary feature keys for (sentence, state); deterministic."""

    def word(v):
        if v is None or v == 0:
            return _NULL
        return sentence.tokens[v - 1].form

    def pos(v):
        if v is None:
            return _NULL
        if v == 0:
            return "ROOT"
        return sentence.tokens[v - 1].upos

    stack, buf = state.stack, state.buffer
    s1 = stack[-1] if len(stack) >= 1 else None
    s2 = stack[-2] if len(stack) >= 2 else None
    s3 = stack[-3] if len(stack) >= 3 else None
    b1 = buf[0] if len(buf) >= 1 else None
    b2 = buf[1] if len(buf) >= 2 else None
    b3 = buf[2] if len(buf) >= 3 else None

    # Leftmost/rightmost attached children of the top two stack items.
    child_rel = {}
    child_pos = {}
    for side, vertex in (("s1", s1), ("s2", s2)):
        left = right = None
        if vertex is not None:
            for rel, gov, child in state.arcs:
                if gov != vertex:
                    continue
                if left is None or child < left[1]:
                    left = (rel, child)
                if right is None or child > right[1]:
                    right = (rel, child)
        child_rel[side, "lc"] = left[0] if left else _NULL
        child_pos[side, "lc"] = pos(left[1]) if left else _NULL
        child_rel[side, "rc"] = right[0] if right else _NULL
        child_pos[side, "rc"] = pos(right[1]) if right else _NULL

    s1w, s1p = word(s1), pos(s1)
    s2w, s2p = word(s2), pos(s2)
    b1w, b1p = word(b1), pos(b1)

    return (
        f"s1.w={s1w}",
        f"s1.p={s1p}",
        f"s2.w={s2w}",
        f"s2.p={s2p}",
        f"s3.w={word(s3)}",
        f"s3.p={pos(s3)}",
        f"b1.w={b1w}",
        f"b1.p={b1p}",
        f"b2.w={word(b2)}",
        f"b2.p={pos(b2)}",
        f"b3.w={word(b3)}",
        f"b3.p={pos(b3)}",
        f"s1.lc.r={child_rel['s1', 'lc']}",
        f"s1.lc.p={child_pos['s1', 'lc']}",
        f"s1.rc.r={child_rel['s1', 'rc']}",
        f"s1.rc.p={child_pos['s1', 'rc']}",
        f"s2.lc.r={child_rel['s2', 'lc']}",
        f"s2.lc.p={child_pos['s2', 'lc']}",
        f"s2.rc.r={child_rel['s2', 'rc']}",
        f"s2.rc.p={child_pos['s2', 'rc']}",
        f"s1.wp={s1w}|{s1p}",
        f"s2.wp={s2w}|{s2p}",
        f"b1.wp={b1w}|{b1p}",
        f"s1p_s2p={s1p}|{s2p}",
        f"s1w_s2w={s1w}|{s2w}",
        f"s1p_b1p={s1p}|{b1p}",
        f"s2p_b1p={s2p}|{b1p}",
        f"s1p_s2p_b1p={s1p}|{s2p}|{b1p}",
        f"s1p_lcr_rcr={s1p}|{child_rel['s1', 'lc']}|{child_rel['s1', 'rc']}",
        "bias",
    )
