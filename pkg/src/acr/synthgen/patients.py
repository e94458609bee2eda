"""Longitudinal patient journeys and their rendering into clinical-note-like documents.

Journeys (the clean abstractions) are sampled first; documents are rendered
from them afterwards. Each patient draws from its own generator seeded from
``(seed, patient index)`` so that adding patients leaves existing ones intact.
"""

from __future__ import annotations

import datetime as dt
import math
import random
from dataclasses import asdict, dataclass, field

from acr.corpus import Corpus, Document
from acr.kb.model import ASSERTED, NEGATED
from acr.ontology import Ontology


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class DistSpec:
    """Integer distribution: lognormal (``shape`` = sigma) with the given mean, clipped to [min, max]."""

    min: int
    max: int
    mean: float
    shape: float = 0.75

    def __post_init__(self):
        if not 0 <= self.min <= self.mean <= self.max:
            raise ValueError(f"need 0 <= min <= mean <= max, got {self}")
        if self.shape < 0:
            raise ValueError("shape must be non-negative")

    def sample(self, rng: random.Random) -> int:
        if self.shape == 0 or self.min == self.max:
            return int(round(self.mean))
        mu = math.log(max(self.mean, 1e-9)) - self.shape ** 2 / 2
        return int(min(self.max, max(self.min, round(rng.lognormvariate(mu, self.shape)))))


@dataclass(frozen=True)
class GeneratorParams:
    seed: int = 42
    n_patients: int = 1000
    docs_per_patient: DistSpec = DistSpec(5, 250, 60.0)
    events_per_patient: DistSpec = DistSpec(3, 25, 10.0, 0.4)
    paraphrase_rate: float = 0.3
    contradiction_rate: float = 0.05
    contradiction_length_coupling: bool = True
    n_queries: int = 200
    zero_result_fraction: float = 0.2
    long_doc_rate: float = 0.03

    def __post_init__(self):
        for name in ("paraphrase_rate", "contradiction_rate", "zero_result_fraction", "long_doc_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.n_patients < 1 or self.n_queries < 0:
            raise ValueError("n_patients must be >= 1 and n_queries >= 0")
        if self.docs_per_patient.min < 1:
            raise ValueError("every patient needs at least one document")
        if not -(2 ** 63) <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorParams":
        obj = dict(obj)
        for k in ("docs_per_patient", "events_per_patient"):
            if k in obj and isinstance(obj[k], dict):
                obj[k] = DistSpec(**obj[k])
        return cls(**obj)


@dataclass
class TrueEvent:
    concept: str
    polarity: str
    date: dt.date
    attributes: dict[str, str] = field(default_factory=dict)

    def to_json(self, event_id: str) -> dict:
        iso = self.date.isoformat()
        return {"event_id": event_id, "concept": self.concept, "polarity": self.polarity,
                "attributes": dict(sorted(self.attributes.items())), "start": iso, "end": iso}


@dataclass
class GroundTruth:
    abstractions: list[dict]
    log: list[dict]


# -- journey sampling ------------------------------------------------------------

EPOCH = dt.date(2008, 1, 1)

CANCER_WEIGHTS = {
    "F": {"breast_cancer": 0.52, "nsclc": 0.15, "sclc": 0.03, "colorectal_cancer": 0.11, "melanoma": 0.05,
          "glioma": 0.02, "leukemia": 0.04, "lymphoma": 0.05, "multiple_myeloma": 0.03},
    "M": {"prostate_cancer": 0.33, "nsclc": 0.24, "sclc": 0.05, "colorectal_cancer": 0.14, "melanoma": 0.07,
          "glioma": 0.03, "leukemia": 0.05, "lymphoma": 0.06, "multiple_myeloma": 0.03},
}
RARE_WEIGHT = 0.003
STAGE_WEIGHTS = (("I", 0.25), ("II", 0.3), ("III", 0.25), ("IV", 0.2))

# cancer -> [(biomarker, P(tested), P(positive | tested))]
BIOMARKERS = {
    "breast_cancer": [("er_expression", 0.95, 0.7), ("her2_amplification", 0.9, 0.2),
                      ("pik3ca_mutation", 0.5, 0.35), ("brca1_mutation", 0.3, 0.15)],
    "nsclc": [("egfr_mutation", 0.9, 0.2), ("alk_rearrangement", 0.8, 0.06),
              ("kras_mutation", 0.6, 0.3), ("pdl1_expression", 0.8, 0.45)],
    "colorectal_cancer": [("kras_mutation", 0.8, 0.4)],
    "melanoma": [("pdl1_expression", 0.5, 0.5)],
    "prostate_cancer": [("brca1_mutation", 0.2, 0.1)],
}
SURGERY = {"breast_cancer": (("mastectomy", 0.45), ("lumpectomy", 0.45)), "nsclc": (("lobectomy", 0.6),),
           "colorectal_cancer": (("colectomy", 0.7),), "prostate_cancer": (("prostatectomy", 0.5),)}
DEFAULT_REGIMEN = {
    "breast_cancer": ("doxorubicin", "paclitaxel"),
    "nsclc": ("carboplatin", "paclitaxel"),
    "sclc": ("carboplatin",),
    "colorectal_cancer": ("carboplatin",),
    "prostate_cancer": (),
    "melanoma": ("pembrolizumab",),
    "glioma": (),
    "leukemia": ("doxorubicin",),
    "lymphoma": ("doxorubicin",),
    "multiple_myeloma": (),
}
SECOND_LINE = {
    "breast_cancer": ("paclitaxel", "palbociclib", "letrozole"),
    "nsclc": ("nivolumab", "pembrolizumab", "osimertinib"),
    "sclc": ("nivolumab",),
    "colorectal_cancer": ("nivolumab",),
    "prostate_cancer": ("enzalutamide",),
    "melanoma": ("nivolumab",),
    "glioma": ("carboplatin",),
    "leukemia": ("carboplatin",),
    "lymphoma": ("nivolumab",),
    "multiple_myeloma": ("doxorubicin",),
}


def _pick(rng: random.Random, weights: dict[str, float]) -> str:
    keys = sorted(weights)
    return rng.choices(keys, [weights[k] for k in keys])[0]


def _days(rng: random.Random, lo: int, hi: int) -> dt.timedelta:
    return dt.timedelta(days=rng.randint(lo, hi))


class _Journey:
    def __init__(self):
        self.events: list[TrueEvent] = []
        self.used: set[str] = set()

    def add(self, concept, date, polarity=ASSERTED, **attrs) -> bool:
        if concept in self.used:
            return False
        self.used.add(concept)
        self.events.append(TrueEvent(concept, polarity, date, dict(attrs)))
        return True

    def date_of(self, concept) -> dt.date | None:
        for e in self.events:
            if e.concept == concept:
                return e.date
        return None

    def has_positive(self, concept) -> bool:
        return any(e.concept == concept and e.polarity == ASSERTED for e in self.events)


def sample_journey(rng: random.Random, ontology: Ontology, params: GeneratorParams) -> tuple[str, list[TrueEvent]]:
    """Diagnosis, biomarkers, treatments and outcomes with coherent dates."""
    sex = rng.choice("FM")
    weights = dict(CANCER_WEIGHTS[sex])
    rare = sorted(c for c in ontology.concepts if c.startswith("rare_"))
    for c in rare:
        weights[c] = RARE_WEIGHT
    cancer = _pick(rng, weights)
    dx = EPOCH + _days(rng, 0, 365 * 9)
    j = _Journey()
    staged = "stage" in ontology.concepts[cancer].attributes_schema
    stage = None
    if staged:
        stage = rng.choices([s for s, _ in STAGE_WEIGHTS], [w for _, w in STAGE_WEIGHTS])[0]
        j.add(cancer, dx, stage=stage)
    else:
        j.add(cancer, dx)
    advanced = stage in ("IV",)

    t_bio = dx + _days(rng, 7, 45)
    for bm, p_test, p_pos in BIOMARKERS.get(cancer, ()):
        if rng.random() < p_test:
            j.add(bm, t_bio, ASSERTED if rng.random() < p_pos else NEGATED)

    t = dx + _days(rng, 14, 60)
    if stage != "IV":
        for proc, p in SURGERY.get(cancer, ()):
            if rng.random() < p:
                j.add(proc, t)
                t += _days(rng, 20, 60)
                break

    # first-line systemic therapy, biomarker driven where possible
    lines: list[str] = []
    if cancer == "breast_cancer":
        if j.has_positive("her2_amplification") and rng.random() < 0.9:
            lines.append("trastuzumab")
        if j.has_positive("er_expression") and rng.random() < 0.9:
            lines.append(rng.choice(("tamoxifen", "letrozole")))
            if j.has_positive("pik3ca_mutation") and rng.random() < 0.4:
                lines.append("alpelisib")
            if advanced and rng.random() < 0.6:
                lines.append("palbociclib")
    elif cancer == "nsclc":
        if j.has_positive("egfr_mutation"):
            first = rng.choices(("osimertinib", "erlotinib", "gefitinib"), (0.6, 0.25, 0.15))[0]
            lines.append(first)
            if first != "osimertinib" and rng.random() < 0.5:
                lines.append("osimertinib")
        elif j.has_positive("alk_rearrangement"):
            lines.append("alectinib")
        elif j.has_positive("pdl1_expression") and rng.random() < 0.6:
            lines.append("pembrolizumab")
    elif cancer == "prostate_cancer" and advanced and rng.random() < 0.6:
        lines.append("enzalutamide")
    elif cancer.startswith("rare_"):
        drugs = sorted(c for c in ontology.concepts if not ontology.concepts[c].attributes_schema
                       and "systemic_therapy" in ontology.ancestors(c) and not ontology.closure(c) - {c})
        lines.append(rng.choice(drugs))
    if not lines or rng.random() < 0.4:
        lines.extend(d for d in DEFAULT_REGIMEN.get(cancer, ()) if rng.random() < 0.7)
    for drug in lines:
        if j.add(drug, t):
            t += _days(rng, 30, 240)

    # optional events, capped by the events-per-patient target
    target = params.events_per_patient.sample(rng)
    pool = ["radiation", "second_line", "metastasis", "metastasis2", "second_primary", "death"]
    if sex == "F":
        pool += ["pregnancy", "hysterectomy", "oophorectomy"]
    probs = {"radiation": 0.35, "second_line": 0.35, "metastasis": 0.6 if advanced else 0.08,
             "metastasis2": 0.25 if advanced else 0.02, "second_primary": 0.05, "death": 0.18,
             "pregnancy": 0.08, "hysterectomy": 0.08, "oophorectomy": 0.07}
    rng.shuffle(pool)
    pool.sort(key=lambda k: k == "death")  # death, if any, is decided last
    for kind in pool:
        if len(j.events) >= target:
            break
        forced = len(j.events) < params.events_per_patient.min
        if not forced and rng.random() >= probs[kind]:
            continue
        if kind == "radiation":
            j.add("radiation_therapy", dx + _days(rng, 30, 400))
        elif kind == "second_line":
            options = [d for d in SECOND_LINE.get(cancer, ()) if d not in j.used]
            if options:
                j.add(rng.choice(options), t)
                t += _days(rng, 30, 240)
        elif kind in ("metastasis", "metastasis2"):
            options = [m for m in ("bone_metastasis", "brain_metastasis", "leptomeningeal_metastasis")
                       if m not in j.used]
            if options:
                w = {"bone_metastasis": 0.6, "brain_metastasis": 0.35, "leptomeningeal_metastasis": 0.05}
                j.add(_pick(rng, {m: w[m] for m in options}), dx + _days(rng, 0, 900))
        elif kind == "second_primary":
            options = {c: w for c, w in CANCER_WEIGHTS[sex].items() if c not in j.used}
            other = _pick(rng, options)
            if "stage" in ontology.concepts[other].attributes_schema:
                j.add(other, dx + _days(rng, 365, 2000), stage=rng.choice(("I", "II")))
            else:
                j.add(other, dx + _days(rng, 365, 2000))
        elif kind == "pregnancy":
            p = dx + _days(rng, -900, 900)
            h = j.date_of("hysterectomy")
            if h is None or p + dt.timedelta(days=300) < h:
                j.add("pregnancy", p)
        elif kind in ("hysterectomy", "oophorectomy"):
            when = dx + _days(rng, 30, 1500)
            p = j.date_of("pregnancy")
            if p is not None and when < p + dt.timedelta(days=300):
                when = p + _days(rng, 300, 700)
            if j.add(kind, when):
                organ = "uterus" if kind == "hysterectomy" else "ovary"
                j.add(organ, when, NEGATED)
        elif kind == "death":
            last = max(e.date for e in j.events)
            j.add("death", last + _days(rng, 30, 700))
    events = sorted(j.events, key=lambda e: (e.date, e.concept))
    return sex, events


# -- rendering ---------------------------------------------------------------------

DOC_TYPES = ("progress note", "oncology consult", "pathology report", "radiology report",
             "discharge summary", "operative note", "medication reconciliation", "telephone encounter")
FILLER = (
    "Vital signs stable.", "Patient reports mild fatigue.", "Appetite is fair.",
    "Denies chest pain or shortness of breath.", "Labs reviewed with the patient.",
    "Follow up in three months.", "Blood pressure within normal limits.", "Weight stable since last visit.",
    "Discussed plan of care with family.", "Sleep quality has improved.",
    "Mild nausea controlled with medication.", "No acute distress.", "Lungs clear to auscultation.",
    "Heart rate regular.", "Abdomen soft and nontender.", "Performance status is good.",
    "Reviewed imaging with radiology.", "Continue current medications.", "Patient ambulating independently.",
    "Pain score two out of ten.", "Hydration encouraged.", "Neuropathy is stable.", "Skin intact without rash.",
    "Return precautions reviewed.", "Complete blood count unremarkable.", "Renal function normal.",
    "Liver enzymes within normal range.", "Social work consulted.", "Nutrition counseling provided.",
    "Patient questions answered.", "Breast exam performed today.", "Lung exam unremarkable.",
    "Tumor board discussion scheduled.", "Port site clean and dry.", "Patient lives with spouse.",
    "Mood is appropriate.", "Exercise tolerance is limited.", "Oncology nurse reviewed side effects.",
)

ASSERT_TEMPLATES = {
    "condition": ("Diagnosed with {s}{d}{a}.", "Assessment: {s}{d}{a}.", "History of {s}{d}{a}.",
                  "Known {s}{d}{a}, followed in clinic."),
    "metastasis": ("Imaging shows {s}{d}.", "Findings consistent with {s}{d}."),
    "biomarker": ("Molecular testing positive for {s}{d}.", "Pathology confirms {s}{d}."),
    "therapy": ("Started {s}{d}.", "Patient is receiving {s}{d}.", "Continues {s}{d}, tolerating well."),
    "procedure": ("Status post {s}{d}.", "Underwent {s}{d}."),
    "clinical_event": ("Obstetrics: {s}{d}.", "Outcome recorded: {s}{d}."),
}
NEGATE_TEMPLATES = {
    "biomarker": ("Negative for {s}{d}.", "Testing shows no {s}{d}."),
}
MIN_MENTIONS, MAX_MENTIONS = 2, 4
CONTRADICT_TEMPLATES = ("No evidence of {s}.", "Workup negative for {s}.", "Patient denies any {s}.")


def _kind(concept: str, ontology: Ontology) -> str:
    anc = ontology.ancestors(concept)
    if "metastatic_disease" in anc:
        return "metastasis"
    for root in ("condition", "biomarker", "therapy", "procedure", "clinical_event"):
        if root in anc:
            return root
    return "anatomy"


def _surface(concept: str, ontology: Ontology, rng: random.Random, paraphrase_rate: float) -> str:
    forms = ontology.concepts[concept].surface_forms
    if len(forms) > 1 and rng.random() < paraphrase_rate:
        return rng.choice(forms[1:])
    return forms[0]


def render_mention(ev: TrueEvent, ontology: Ontology, rng: random.Random, paraphrase_rate: float) -> str:
    s = _surface(ev.concept, ontology, rng, paraphrase_rate)
    kind = _kind(ev.concept, ontology)
    d = f" @date{{{ev.date.isoformat()}}}"
    a = f", stage {ev.attributes['stage']}" if "stage" in ev.attributes else ""
    if ev.polarity == NEGATED:
        templates = NEGATE_TEMPLATES.get(kind)
        if templates is None:
            raise GenerationError(f"no negated template for {ev.concept}")
    else:
        templates = ASSERT_TEMPLATES[kind]
    return rng.choice(templates).format(s=s, d=d, a=a)


def _mentioned(ev: TrueEvent) -> bool:
    # absence of an organ is implied by the surgery mention, never written separately
    return not (ev.polarity == NEGATED and ev.concept in ("uterus", "ovary"))


def _filler(rng: random.Random, n: int) -> list[str]:
    return [rng.choice(FILLER) for _ in range(n)]


def render_patient(patient_id: str, events: list[TrueEvent], ontology: Ontology, params: GeneratorParams,
                   rng: random.Random) -> tuple[list[Document], list[dict]]:
    n_docs = params.docs_per_patient.sample(rng)
    first = min(e.date for e in events)
    last = max(e.date for e in events)
    death = next((e.date for e in events if e.concept == "death"), None)
    begin = first - _days(rng, 0, 90)
    end = death if death is not None else last + _days(rng, 30, 900)
    span = (end - begin).days
    dates = sorted(begin + dt.timedelta(days=rng.randint(0, span)) for _ in range(n_docs - 1)) + [end]
    width = max(3, len(str(n_docs - 1)))
    doc_ids = [f"{patient_id}-D{i:0{width}d}" for i in range(n_docs)]
    bodies: list[list[str]] = [[] for _ in range(n_docs)]

    def docs_from(day: dt.date) -> list[int]:
        return [i for i, d in enumerate(dates) if d >= day]

    support: dict[str, int] = {}
    for ev in events:
        if not _mentioned(ev):
            continue
        later = docs_from(ev.date)
        n_mentions = rng.randint(MIN_MENTIONS, MAX_MENTIONS)
        support[ev.concept] = n_mentions
        picks = [later[0]] + [rng.choice(later) for _ in range(n_mentions - 1)]
        for i in picks:
            bodies[i].append(render_mention(ev, ontology, rng, params.paraphrase_rate))

    # contradictions: each targets a distinct event and is outvoted by the true mentions
    trials = n_docs if params.contradiction_length_coupling else int(round(params.docs_per_patient.mean))
    n_contra = sum(rng.random() < params.contradiction_rate for _ in range(trials)) if params.contradiction_rate else 0
    log = []
    if n_contra:
        # an event can absorb up to (its true mentions - 1) contradicting mentions, so the
        # full record still outvotes them while a partial view of it may not
        targets: list[tuple[str, TrueEvent | None]] = []
        for ev in events:
            if not _mentioned(ev) or ev.concept == "death":
                continue
            targets += [("polarity", ev)] * (support[ev.concept] - 1)
        concepts = {e.concept for e in events}
        if "uterus" in concepts and "pregnancy" not in concepts:
            targets += [("constraint", None)] * (support["hysterectomy"] - 1)
        rng.shuffle(targets)
        for kind, ev in targets[:n_contra]:
            if kind == "constraint":
                h = next(e.date for e in events if e.concept == "uterus")
                cands = [i for i in docs_from(h) if dates[i] > h] or [n_docs - 1]
                i = rng.choice(cands)
                day = max(dates[i], h + dt.timedelta(days=1))
                text = f"Obstetrics: {_surface('pregnancy', ontology, rng, params.paraphrase_rate)} @date{{{day}}}."
                concept, polarity = "pregnancy", ASSERTED
            else:
                i = rng.choice(docs_from(ev.date))
                s = _surface(ev.concept, ontology, rng, params.paraphrase_rate)
                if ev.polarity == ASSERTED:
                    text = rng.choice(CONTRADICT_TEMPLATES).format(s=s)
                    concept, polarity = ev.concept, NEGATED
                else:
                    text = f"Molecular testing positive for {s}."
                    concept, polarity = ev.concept, ASSERTED
            bodies[i].append(text)
            log.append({"patient_id": patient_id, "doc_id": doc_ids[i], "kind": kind,
                        "concept": concept, "polarity": polarity})

    docs = []
    for i in range(n_docs):
        long_doc = rng.random() < params.long_doc_rate
        n_fill = rng.randint(150, 300) if long_doc else rng.randint(3, 10)
        sentences = _filler(rng, n_fill)
        for m in bodies[i]:
            sentences.insert(rng.randint(0, len(sentences)), m)
        doc_type = rng.choice(DOC_TYPES)
        text = f"{doc_type.upper()}\nDate: {dates[i].isoformat()}\n" + " ".join(sentences)
        docs.append(Document(patient_id, doc_ids[i], dates[i], doc_type, text))
    log.sort(key=lambda r: (r["doc_id"], r["concept"]))
    return docs, log


def patient_rng(seed: int, index: int, stream: str) -> random.Random:
    return random.Random(f"{seed}:{stream}:{index}")


def patient_id_for(index: int) -> str:
    return f"P{index:05d}"


def gen_patient(index: int, ontology: Ontology, params: GeneratorParams) -> tuple[dict, list[Document], list[dict]]:
    pid = patient_id_for(index)
    sex, events = sample_journey(patient_rng(params.seed, index, "journey"), ontology, params)
    abstraction = {"patient_id": pid, "sex": sex,
                   "events": [e.to_json(f"e{i:03d}") for i, e in enumerate(events)]}
    docs, log = render_patient(pid, events, ontology, params, patient_rng(params.seed, index, "render"))
    return abstraction, docs, log


def gen_patients(params: GeneratorParams, ontology: Ontology) -> tuple[Corpus, GroundTruth]:
    abstractions, documents, log = [], [], []
    for i in range(params.n_patients):
        a, docs, lg = gen_patient(i, ontology, params)
        abstractions.append(a)
        documents.extend(docs)
        log.extend(lg)
    return Corpus(documents), GroundTruth(abstractions, log)
