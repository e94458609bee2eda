"""Hand-built inputs shared by several test modules."""

from __future__ import annotations

import datetime as dt

from acr.corpus import Corpus, Document
from acr.ontology import Concept, Constraint, Ontology

D = dt.date


def small_ontology() -> Ontology:
    """A chain plus siblings: enough to exercise closure, synonyms and the pregnancy constraint."""
    staged = {"stage": {"type": "ordinal", "scale": "stage"}}
    concepts = [
        Concept("condition"),
        Concept("cancer", ("cancer",), ("condition",)),
        Concept("breast_cancer", ("breast cancer", "breast carcinoma"), ("cancer",), staged),
        Concept("lung_cancer", ("lung cancer",), ("cancer",), staged),
        Concept("therapy"),
        Concept("systemic_therapy", ("systemic therapy",), ("therapy",)),
        Concept("targeted_therapy", ("targeted therapy",), ("systemic_therapy",)),
        Concept("tki", ("TKI",), ("targeted_therapy",)),
        Concept("egfr_tki", ("EGFR TKI",), ("tki",)),
        Concept("osimertinib", ("osimertinib", "Tagrisso"), ("egfr_tki",)),
        Concept("tamoxifen", ("tamoxifen", "Nolvadex"), ("systemic_therapy",)),
        Concept("biomarker"),
        Concept("brca1_mutation", ("BRCA1 mutation",), ("biomarker",)),
        Concept("pik3ca_mutation", ("PIK3CA mutation",), ("biomarker",)),
        Concept("clinical_event"),
        Concept("pregnancy", ("pregnancy",), ("clinical_event",)),
        Concept("anatomy"),
        Concept("uterus", ("uterus",), ("anatomy",)),
        Concept("ovary", ("ovary",), ("anatomy",)),
        Concept("procedure"),
        Concept("hysterectomy", ("hysterectomy",), ("procedure",), {}, ("uterus",)),
        Concept("oophorectomy", ("oophorectomy",), ("procedure",), {}, ("ovary",)),
    ]
    return Ontology(concepts, [Constraint("pregnancy_requires_uterus", "pregnancy", "uterus")],
                    {"stage": ["0", "I", "II", "III", "IV"]})


def paradox_corpus() -> Corpus:
    """Breast cancer, then hysterectomy with oophorectomy, then a pregnancy: one document each."""
    return Corpus([
        Document("P1", "P1-D001", D(2015, 3, 1), "oncology consult",
                 "Assessment: invasive breast cancer @date{2015-03-01}, stage II."),
        Document("P1", "P1-D002", D(2016, 6, 1), "operative note",
                 "Procedure: hysterectomy @date{2016-06-01} and oophorectomy @date{2016-06-01} "
                 "performed without complication."),
        Document("P1", "P1-D003", D(2018, 2, 1), "obstetrics note",
                 "Obstetrics: pregnancy @date{2018-02-01} confirmed by ultrasound."),
    ])
