"""Walkthrough: a tenant asks for telemedicine in plain language; the 5 ms
control slice cannot be placed, so the workflow proposes the minimal relaxed
tier, waits for approval, then deploys both slices.

Run from the repository root:  python demos/06_tenant_negotiation.py
"""

from sliceforge.agents import WorkflowEngine
from sliceforge.gateway.scenario import build_context, load_scenario

INTENT = ("telemedicine service with high quality video calls, security, "
          "sensitive medical data")

context = build_context(load_scenario("scenarios/reference.yaml"))
engine = WorkflowEngine(context)

session = engine.start_session(INTENT, initiator="tenant")
engine.run_session(session, until="blocked")

print(f"state: {session.state}")
(proposal,) = session.pending_choice
print(f"the network cannot honour {proposal['current_value']:g} ms "
      f"({proposal['reason']}); proposed relaxation: "
      f"{proposal['attribute']} {proposal['current_value']:g} -> "
      f"{proposal['proposed_value']:g}")

engine.submit_choice(session, selection=0)   # tenant approves
print(f"\nafter approval: {session.state}")
for item in session.result["slices"]:
    print(f"  {item['nsi_id']}: {item['status']}, "
          f"segments {item['segments']}")

kinds = [m.kind for m in session.transcript]
print(f"\ntranscript kinds: {kinds}")
