"""Seeded synthetic benchmark: ontology, journeys, rendered records, query bank and gold."""

from acr.synthgen.gold import GoldGenerationError, gen_gold
from acr.synthgen.ontology_gen import OntologySize, gen_ontology
from acr.synthgen.patients import (
    DistSpec,
    GenerationError,
    GeneratorParams,
    GroundTruth,
    gen_patient,
    gen_patients,
)
from acr.synthgen.queries import expert_class, expert_score, gen_query_bank

__all__ = [
    "DistSpec", "GenerationError", "GeneratorParams", "GoldGenerationError", "GroundTruth", "OntologySize",
    "expert_class", "expert_score", "gen_gold", "gen_ontology", "gen_patient", "gen_patients", "gen_query_bank",
]
