"""Walkthrough: the operator's two-task agent workflow -- modelling via the
delegated simulation agent, a human pause to pick a topology, deployment with
descriptor generation, and a bit-identical replay of the whole transcript.

Run from the repository root:  python demos/05_operator_workflow.py
"""

from sliceforge.agents import WorkflowEngine, replay, transcript_to_lines
from sliceforge.gateway.scenario import build_context, load_scenario

GOAL = ("Design and deploy a network slice so that the average slice "
        "utilization ratio is greater than 80 percent")

scenario = load_scenario("scenarios/operator.yaml")
context = build_context(scenario)
engine = WorkflowEngine(context)

session = engine.start_session(GOAL, initiator="operator")
print(f"{session.session_id} planned tasks: "
      f"{[(t.tool_used, t.assigned_agent) for t in session.tasks]}")

engine.run_session(session, until="blocked")
print(f"\nstate: {session.state} -- the operator must confirm a topology:")
for i, option in enumerate(session.pending_choice):
    print(f"  [{i}] {option['summary']}")

engine.submit_choice(session, selection=0)
print(f"\nchoice accepted; state: {session.state}")
result = session.result["slices"][0]
print(f"slice {result['nsi_id']} is {result['status']}; descriptor bundle has "
      f"1 slice profile, 1 NSD, {len(result['descriptors']['vnfd_docs'])} VNFDs")

print("\ntranscript:")
for message in session.transcript:
    print(f"  #{message.seq} {message.from_agent} -> {message.to_agent}: "
          f"{message.kind}")

# Deterministic adapter + fixed scenario means the run replays exactly.
lines = transcript_to_lines(engine, session)
replayed = replay(lines, build_context(scenario))
identical = [m.to_doc() for m in replayed.transcript] == \
    [m.to_doc() for m in session.transcript]
print(f"\nreplay message-identical: {identical}")
