"""sliceforge: a multi-domain network-slicing management-and-orchestration
simulator with an agentic workflow runtime and a deterministic stand-in for
the language model driving it."""

from . import agents, embedder, errors, intent, orchestrator, profiles, substrate

__all__ = ["agents", "embedder", "errors", "intent", "orchestrator",
           "profiles", "substrate"]

__version__ = "0.1.0"
