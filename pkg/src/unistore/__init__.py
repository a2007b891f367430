"""Event-sourced object engine with uniform data/metadata handling."""

from .access import AccessProfile, Decision, Session
from .appraisal import AppraisalParams, Score, UnitStats
from .errors import EngineError
from .formula import Binding, Formula, SubjectView, parse
from .model import AttributeSpec, DataObject, StoreSnapshot
from .packs import ComponentPack, Conflict, MergePlan, analyze_pack, apply_plan, load_pack, seed_demo
from .store import Store

__all__ = [
    "AccessProfile",
    "AppraisalParams",
    "AttributeSpec",
    "Binding",
    "ComponentPack",
    "Conflict",
    "DataObject",
    "Decision",
    "EngineError",
    "Formula",
    "MergePlan",
    "Score",
    "Session",
    "Store",
    "StoreSnapshot",
    "SubjectView",
    "UnitStats",
    "analyze_pack",
    "apply_plan",
    "load_pack",
    "parse",
    "seed_demo",
]

__version__ = "0.1.0"
