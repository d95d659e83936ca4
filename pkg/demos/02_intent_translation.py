"""Walkthrough: natural-language intents to service profiles with the
deterministic rule-based adapter, including phrases the rules cannot encode.

Run from the repository root:  python demos/02_intent_translation.py
"""

import yaml

from sliceforge.intent import (
    IntentText,
    RuleBasedAdapter,
    extract_keywords,
    propose_chain,
    translate_intent,
)
from sliceforge.profiles import service_profile_to_doc

adapter = RuleBasedAdapter()

text = ("telemedicine service with high quality video calls, security, "
        "sensitive medical data")
hits = extract_keywords(IntentText(text))
print("keywords:")
for hit in hits.matched:
    print(f"  {hit.keyword!r:30} -> {hit.category}")

profile = translate_intent(IntentText(text), adapter)
print("\nderived service profile (two slices: bulk video + control):")
print(yaml.dump(service_profile_to_doc(profile), sort_keys=False))

# Qualitative phrases with no quantifiable rule are surfaced, never dropped.
fancy = extract_keywords(IntentText("premium gold-plated internet, please"))
print(f"not encoded: {list(fancy.unmodeled)}")

# Services outside the catalogue get a generic chain assembled on the spot;
# low-latency classes pin the first hop to the access network.
graph = propose_chain("smart-factory", "urllc", adapter)
print("\nproposed chain for an unknown service:")
for vnf in graph.vnfs:
    pin = f"  (pinned to {vnf.domain_affinity})" if vnf.domain_affinity else ""
    print(f"  {vnf.vnf_id}: {vnf.function_kind}, {vnf.cpu} vCPU{pin}")
