"""No footprint is canonically best: a wand with two incomparable choices.

    acc(x.b, 1/2)  --*  acc(x.b, 1/2) * (x.b ==> acc(x.f))

Packaged where x.b is false and both locations are fully owned, either
full permission to x.f (covers the guard whatever x.b becomes) or half
permission to x.b (pins its value to false, trivializing the guard) is a
valid footprint.  The oracle enumerates both; the default strategy picks
x.f; a hand-written derivation realizes the other choice and the checker
accepts it.
"""

import json
from pathlib import Path

from wandpack import minimal_footprints, package_sound, parse_assertion_text, parse_state_text, plan
from wandpack.package_logic import check_derivation, extract_footprint
from wandpack.parser import format_state, parse_universe_text
from wandpack.serialization import derivation_doc_parse

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

u = parse_universe_text((CORPUS / "mixed.universe").read_text())
store = {"x": "x"}
wand = parse_assertion_text("acc(x.b, 1/2) --* acc(x.b, 1/2) * (x.b ==> acc(x.f))")
outer = parse_state_text("{x.b @ 1 = false, x.f @ 1 = 0}")

print("minimal footprints (oracle, compatible with the left-hand side):")
for fp in minimal_footprints(wand, "standard", plan(u), store, compatible_with_lhs=True):
    print("  ", format_state(fp))

out = package_sound(outer, wand, (), store, u)
print("\ndefault strategy extracts:", format_state(out.footprint))

doc = json.loads((CORPUS / "derivations" / "two_footprints_half_xb.json").read_text())
du, dstore, dwand, conf, deriv = derivation_doc_parse(doc)
final = check_derivation(conf, deriv, du, dstore)
print("hand-written derivation realizes:",
      format_state(extract_footprint(conf.context.outer, final.outer)))
