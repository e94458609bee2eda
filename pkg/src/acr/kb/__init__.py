from acr.kb.consolidate import ResolutionPolicy, check_model, consolidate, noisy_or
from acr.kb.extract import RuleExtractor, extract_facts
from acr.kb.model import (
    ACTIVE,
    ASSERTED,
    NEGATED,
    RETRACTED,
    Conflict,
    ConsolidatedEvent,
    Fact,
    PatientModel,
)
from acr.kb.store import (
    KnowledgeBase,
    KnowledgeBaseError,
    build_kb,
    build_kb_from_abstractions,
    build_kb_from_corpus,
    model_from_corpus_patient,
)

__all__ = [
    "ACTIVE", "ASSERTED", "NEGATED", "RETRACTED",
    "Conflict", "ConsolidatedEvent", "Fact", "KnowledgeBase", "KnowledgeBaseError", "PatientModel",
    "ResolutionPolicy", "RuleExtractor",
    "build_kb", "build_kb_from_abstractions", "build_kb_from_corpus", "check_model",
    "consolidate", "extract_facts", "model_from_corpus_patient", "noisy_or",
]
