"""Oncology-flavoured ontology for the synthetic benchmark."""

from __future__ import annotations

import random
from dataclasses import dataclass

from acr.ontology import Concept, Constraint, Ontology

STAGE_SCALE = ["0", "I", "II", "III", "IV"]
STAGED = {"stage": {"type": "ordinal", "scale": "stage"}}

# (id, parents, surface forms, staged?, implies_absent)
CORE: list[tuple[str, tuple[str, ...], tuple[str, ...], bool, tuple[str, ...]]] = [
    ("condition", (), (), False, ()),
    ("cancer", ("condition",), ("cancer", "malignancy"), False, ()),
    ("solid_tumor", ("cancer",), ("solid tumor",), False, ()),
    ("breast_cancer", ("solid_tumor",), ("breast cancer", "breast carcinoma", "malignant neoplasm of breast"), True, ()),
    ("lung_cancer", ("solid_tumor",), ("lung cancer", "lung carcinoma"), True, ()),
    ("nsclc", ("lung_cancer",), ("non-small cell lung cancer", "NSCLC"), True, ()),
    ("sclc", ("lung_cancer",), ("small cell lung cancer", "SCLC"), True, ()),
    ("colorectal_cancer", ("solid_tumor",), ("colorectal cancer", "colon cancer"), True, ()),
    ("prostate_cancer", ("solid_tumor",), ("prostate cancer", "prostate carcinoma"), True, ()),
    ("melanoma", ("solid_tumor",), ("melanoma", "malignant melanoma"), True, ()),
    ("glioma", ("solid_tumor",), ("glioma", "primary brain tumor"), False, ()),
    ("liquid_tumor", ("cancer",), ("liquid tumor", "hematologic malignancy"), False, ()),
    ("leukemia", ("liquid_tumor",), ("leukemia",), False, ()),
    ("lymphoma", ("liquid_tumor",), ("lymphoma",), False, ()),
    ("multiple_myeloma", ("liquid_tumor",), ("multiple myeloma", "plasma cell myeloma"), False, ()),
    ("metastatic_disease", ("condition",), ("metastatic disease",), False, ()),
    ("brain_metastasis", ("metastatic_disease",), ("brain metastasis", "brain metastases"), False, ()),
    ("bone_metastasis", ("metastatic_disease",), ("bone metastasis", "bone metastases"), False, ()),
    ("leptomeningeal_metastasis", ("metastatic_disease",), ("leptomeningeal metastasis",), False, ()),

    ("biomarker", (), (), False, ()),
    ("gene_alteration", ("biomarker",), ("gene alteration",), False, ()),
    ("egfr_mutation", ("gene_alteration",), ("EGFR mutation",), False, ()),
    ("alk_rearrangement", ("gene_alteration",), ("ALK rearrangement", "ALK fusion"), False, ()),
    ("kras_mutation", ("gene_alteration",), ("KRAS mutation",), False, ()),
    ("pik3ca_mutation", ("gene_alteration",), ("PIK3CA mutation",), False, ()),
    ("brca1_mutation", ("gene_alteration",), ("BRCA1 mutation",), False, ()),
    ("protein_expression", ("biomarker",), ("protein expression",), False, ()),
    ("er_expression", ("protein_expression",), ("estrogen receptor expression", "ER expression"), False, ()),
    ("her2_amplification", ("protein_expression",), ("HER2 amplification", "HER2 overexpression"), False, ()),
    ("pdl1_expression", ("protein_expression",), ("PD-L1 expression",), False, ()),

    ("therapy", (), (), False, ()),
    ("systemic_therapy", ("therapy",), ("systemic therapy",), False, ()),
    ("targeted_therapy", ("systemic_therapy",), ("targeted therapy",), False, ()),
    ("tki", ("targeted_therapy",), ("tyrosine kinase inhibitor", "TKI"), False, ()),
    ("egfr_tki", ("tki",), ("EGFR TKI", "EGFR tyrosine kinase inhibitor"), False, ()),
    ("osimertinib", ("egfr_tki",), ("osimertinib", "Tagrisso"), False, ()),
    ("erlotinib", ("egfr_tki",), ("erlotinib", "Tarceva"), False, ()),
    ("gefitinib", ("egfr_tki",), ("gefitinib", "Iressa"), False, ()),
    ("alk_inhibitor", ("tki",), ("ALK inhibitor",), False, ()),
    ("alectinib", ("alk_inhibitor",), ("alectinib", "Alecensa"), False, ()),
    ("cdk46_inhibitor", ("targeted_therapy",), ("CDK4/6 inhibitor",), False, ()),
    ("palbociclib", ("cdk46_inhibitor",), ("palbociclib", "Ibrance"), False, ()),
    ("pi3k_inhibitor", ("targeted_therapy",), ("PI3K inhibitor",), False, ()),
    ("alpelisib", ("pi3k_inhibitor",), ("alpelisib", "Piqray"), False, ()),
    ("her2_targeted_therapy", ("targeted_therapy",), ("HER2-targeted therapy",), False, ()),
    ("trastuzumab", ("her2_targeted_therapy",), ("trastuzumab", "Herceptin"), False, ()),
    ("chemotherapy", ("systemic_therapy",), ("chemotherapy",), False, ()),
    ("paclitaxel", ("chemotherapy",), ("paclitaxel", "Taxol"), False, ()),
    ("carboplatin", ("chemotherapy",), ("carboplatin", "Paraplatin"), False, ()),
    ("doxorubicin", ("chemotherapy",), ("doxorubicin", "Adriamycin"), False, ()),
    ("hormone_therapy", ("systemic_therapy",), ("hormone therapy", "endocrine therapy"), False, ()),
    ("tamoxifen", ("hormone_therapy",), ("tamoxifen", "Nolvadex"), False, ()),
    ("letrozole", ("hormone_therapy",), ("letrozole", "Femara"), False, ()),
    ("enzalutamide", ("hormone_therapy",), ("enzalutamide", "Xtandi"), False, ()),
    ("immunotherapy", ("systemic_therapy",), ("immunotherapy",), False, ()),
    ("pembrolizumab", ("immunotherapy",), ("pembrolizumab", "Keytruda"), False, ()),
    ("nivolumab", ("immunotherapy",), ("nivolumab", "Opdivo"), False, ()),
    ("radiation_therapy", ("therapy",), ("radiation therapy", "radiotherapy"), False, ()),

    ("procedure", (), (), False, ()),
    ("surgical_procedure", ("procedure",), ("surgical procedure",), False, ()),
    ("breast_surgery", ("surgical_procedure",), ("breast surgery",), False, ()),
    ("mastectomy", ("breast_surgery",), ("mastectomy", "total mastectomy"), False, ()),
    ("lumpectomy", ("breast_surgery",), ("lumpectomy", "segmental mastectomy", "partial mastectomy"), False, ()),
    ("lobectomy", ("surgical_procedure",), ("lobectomy",), False, ()),
    ("colectomy", ("surgical_procedure",), ("colectomy",), False, ()),
    ("prostatectomy", ("surgical_procedure",), ("prostatectomy",), False, ()),
    ("hysterectomy", ("surgical_procedure",), ("hysterectomy",), False, ("uterus",)),
    ("oophorectomy", ("surgical_procedure",), ("oophorectomy", "removal of the ovaries"), False, ("ovary",)),

    ("clinical_event", (), (), False, ()),
    ("pregnancy", ("clinical_event",), ("pregnancy", "pregnant"), False, ()),
    ("death", ("clinical_event",), ("death", "deceased"), False, ()),

    ("anatomy", (), (), False, ()),
    ("uterus", ("anatomy",), ("uterus",), False, ()),
    ("ovary", ("anatomy",), ("ovary", "ovaries"), False, ()),
]

CONSTRAINTS = [Constraint("pregnancy_requires_uterus", "pregnancy", "uterus")]

# parents that invented concepts attach to
EXTRA_CONDITION_PARENTS = ("solid_tumor", "liquid_tumor")
EXTRA_DRUG_PARENTS = ("egfr_tki", "alk_inhibitor", "chemotherapy", "immunotherapy", "hormone_therapy")
_SYL = ("ka", "lo", "mi", "ra", "te", "vo", "zu", "ne", "si", "da", "pe", "xo", "ri", "ma", "tu")


@dataclass(frozen=True)
class OntologySize:
    extra_conditions: int = 8
    extra_drugs: int = 8

    def __post_init__(self):
        if self.extra_conditions < 0 or self.extra_drugs < 0:
            raise ValueError("extra concept counts must be non-negative")


def _word(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(_SYL) for _ in range(n))


def gen_ontology(seed: int = 42, size: OntologySize = OntologySize()) -> Ontology:
    """Fixed oncology core plus seeded invented rare tumours and brand/generic drug pairs."""
    rng = random.Random(f"ontology:{seed}")
    concepts = [
        Concept(cid, forms, parents, STAGED if staged else {}, absent)
        for cid, parents, forms, staged, absent in CORE
    ]
    taken = {f.lower() for c in concepts for f in (c.id, *c.surface_forms)}

    def fresh(make) -> str:
        while True:
            w = make()
            if w.lower() not in taken:
                taken.add(w.lower())
                return w

    for i in range(size.extra_conditions):
        stem = fresh(lambda: _word(rng, 3) + "oma")
        parent = EXTRA_CONDITION_PARENTS[i % len(EXTRA_CONDITION_PARENTS)]
        concepts.append(Concept(f"rare_{stem}", (stem, f"{stem} tumor"), (parent,), STAGED, ()))
    for i in range(size.extra_drugs):
        generic = fresh(lambda: _word(rng, 2) + rng.choice(("tinib", "mab", "platin", "lisib")))
        brand = fresh(lambda: _word(rng, 2).capitalize() + rng.choice(("ra", "vex", "lor", "zia")))
        parent = EXTRA_DRUG_PARENTS[i % len(EXTRA_DRUG_PARENTS)]
        concepts.append(Concept(generic, (generic, brand), (parent,), {}, ()))
    onto = Ontology(concepts, CONSTRAINTS, {"stage": list(STAGE_SCALE)})
    if len(onto) < 20 or onto.max_depth() < 4:
        raise ValueError("ontology too small: need >= 20 concepts and ISA depth >= 4")
    return onto


THERAPY_CHAIN = ("systemic_therapy", "targeted_therapy", "tki", "egfr_tki", "osimertinib")
CONDITION_CHAINS = (
    ("cancer", "solid_tumor", "lung_cancer", "nsclc"),
    ("cancer", "liquid_tumor", "leukemia"),
    ("cancer", "solid_tumor", "breast_cancer"),
)
