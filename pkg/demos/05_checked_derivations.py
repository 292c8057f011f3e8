"""Derivations are data: every package emits a proof you can re-check.

A successful package is justified by an explicit tree of rule
applications (implication / star / atom / extract) over a witness set.
The tree serializes to a self-contained JSON document, and the checker
re-validates every premise — a wrong extraction or an overreaching atom
choice is rejected with the offending rule path.
"""

import json
from pathlib import Path

from wandpack import package_sound, parse_assertion_text, parse_state_text
from wandpack.package_logic import CheckFailure, check_derivation, extract_footprint
from wandpack.parser import format_state, parse_universe_text
from wandpack.serialization import derivation_doc, derivation_doc_parse, dumps_canonical

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

u = parse_universe_text((CORPUS / "pointers.universe").read_text())
store = {"x": "x", "y": "y", "z": "z"}
wand = parse_assertion_text("acc(x.f) * (x.f == y || x.f == z) --* acc(x.f) * acc(x.f.g)")
outer = parse_state_text("{x.f @ 1 = y, y.g @ 1 = 0, z.g @ 1 = 0}")

out = package_sound(outer, wand, (), store, u)
print("package succeeded, footprint:", format_state(out.footprint))

doc = derivation_doc(u, store, wand, out.configuration, out.derivation)
text = dumps_canonical(doc)
print(f"serialized derivation: {len(text)} bytes, rules used:",
      sorted({m for m in ("implication", "star", "atom", "extract") if f'"rule": "{m}"' in text}))

u2, store2, wand2, conf2, deriv2 = derivation_doc_parse(json.loads(text))
final = check_derivation(conf2, deriv2, u2, store2)
print("re-checked after round trip, footprint:",
      format_state(extract_footprint(conf2.context.outer, final.outer)))

# tamper with the extraction: claim a smaller footprint than the atoms need
broken = json.loads(text)
node = broken["derivation"]
while node["rule"] != "extract":
    node = node.get("child") or node["right"]
node["state"] = "{y.g @ 1 = 0}"  # drops z.g, which the x.f == z case needs
u3, store3, wand3, conf3, deriv3 = derivation_doc_parse(broken)
try:
    check_derivation(conf3, deriv3, u3, store3)
    print("tampered derivation accepted?!")
except CheckFailure as e:
    print("tampered derivation rejected:", e)
