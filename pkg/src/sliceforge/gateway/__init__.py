"""HTTP service, scenario loading, inventory persistence, and the CLI."""

from .scenario import Scenario, build_context, load_scenario
from .inventory import InventoryStore, load_store, save_store

__all__ = ["Scenario", "build_context", "load_scenario",
           "InventoryStore", "load_store", "save_store"]
