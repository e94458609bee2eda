"""Query bank generation: template families, relation annotations and category steering.

Expert-class rubric (deterministic): score = number of operators (NEG counts as
one) + number of attribute filters + 1 if any atom sits at ISA depth >= 4.
Base = 0, Low = 1, Medium = 2..3, Hard >= 4.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from acr.evaluate.metrics import BROAD, DEFAULT_ALPHA, DEFAULT_BETA, NARROW, SPARSE, ZERO, categorize
from acr.kb.store import KnowledgeBase, build_kb_from_abstractions
from acr.ontology import Ontology
from acr.squerl.ast import And, Atom, Before, Except, Filter, Node, Or, atoms, map_atoms, operator_count, to_text
from acr.squerl.bank import QueryRecord, validate_bank
from acr.squerl.engine import execute
from acr.squerl.translate import render_nl
from acr.synthgen.ontology_gen import CONDITION_CHAINS, THERAPY_CHAIN
from acr.synthgen.patients import GenerationError, GeneratorParams

DEEP = 4


def expert_score(ast: Node, ontology: Ontology) -> int:
    ats = list(atoms(ast))
    filters = sum(len(a.filters) for a in ats)
    deep = any(ontology.depth(a.concept) >= DEEP for a in ats)
    return operator_count(ast) + filters + int(deep)


def expert_class(ast: Node, ontology: Ontology) -> str:
    s = expert_score(ast, ontology)
    if s == 0:
        return "Base"
    if s == 1:
        return "Low"
    return "Medium" if s <= 3 else "Hard"


@dataclass
class Candidate:
    ast: Node
    family: str
    surface: dict[str, str] = field(default_factory=dict)  # concept -> surface form used in text
    nl_ast: Node | None = None  # what the NL names, when it differs from ast (subtype chains)
    relations: list[tuple[str, int]] = field(default_factory=list)  # (kind, index into selection)

    def squerl_text(self) -> str:
        if not self.surface:
            return to_text(self.ast)
        return to_text(map_atoms(self.ast, lambda a: Atom(self.surface.get(a.concept, a.concept),
                                                           a.polarity, a.filters)))

    def nl_text(self, ontology: Ontology) -> str:
        def surface(cid):
            if cid in self.surface:
                return self.surface[cid]
            forms = ontology.concepts[cid].surface_forms
            return forms[0] if forms else cid.replace("_", " ")
        return render_nl(self.nl_ast or self.ast, ontology, surface)


def _leaves(ontology: Ontology, root: str) -> list[str]:
    return sorted(c for c in ontology.closure(root) if ontology.closure(c) == {c})


def concept_groups(ontology: Ontology) -> dict[str, list[str]]:
    onto = ontology
    return {
        "cancer": _leaves(onto, "cancer"),
        "staged": sorted(c for c in onto.closure("cancer") if "stage" in onto.concepts[c].attributes_schema),
        "biomarker": _leaves(onto, "biomarker"),
        "drug": _leaves(onto, "systemic_therapy"),
        "procedure": _leaves(onto, "surgical_procedure"),
        "metastasis": _leaves(onto, "metastatic_disease"),
        "internal": sorted(c for c in onto.concepts if onto.concepts[c].parents and onto.closure(c) != {c}
                           and "anatomy" not in onto.ancestors(c)),
        "event": ["pregnancy", "death", "radiation_therapy"],
    }


def candidate_pool(ontology: Ontology) -> list[Candidate]:
    g = concept_groups(ontology)
    A = Atom
    pool: list[Candidate] = []
    singles = g["cancer"] + g["biomarker"] + g["drug"] + g["procedure"] + g["metastasis"] + g["internal"] + g["event"]
    pool += [Candidate(A(c), "single") for c in sorted(set(singles))]
    for c in g["staged"]:
        for op, v in ((">=", "III"), ("<=", "II"), ("=", "IV"), ("=", "I")):
            pool.append(Candidate(A(c, filters=(Filter("stage", op, v),)), "stage"))
    for c in g["cancer"]:
        for b in g["biomarker"]:
            pool.append(Candidate(And(A(c), A(b)), "and"))
            pool.append(Candidate(And(A(c), A(b, "negated")), "neg"))
        for x in g["drug"] + g["procedure"] + g["metastasis"] + g["event"]:
            pool.append(Candidate(And(A(c), A(x)), "and"))
        for x in g["drug"] + g["procedure"] + ["death"]:
            pool.append(Candidate(Except(A(c), A(x)), "except"))
        for x in ("pregnancy", "death") + tuple(g["procedure"]):
            pool.append(Candidate(Before(A(c), A(x)), "before"))
    for b in g["biomarker"]:
        for d in g["drug"]:
            pool.append(Candidate(And(A(b), A(d)), "and"))
    for x, y in itertools.combinations(g["cancer"], 2):
        pool.append(Candidate(Or(A(x), A(y)), "or"))
        pool.append(Candidate(And(A(x), A(y)), "and"))
    for x, y in itertools.permutations(g["drug"], 2):
        pool.append(Candidate(Before(A(x), A(y)), "before"))
    for c in ("breast_cancer", "nsclc", "colorectal_cancer"):
        if c not in ontology:
            continue
        for b in g["biomarker"]:
            for d in g["drug"]:
                pool.append(Candidate(And(And(A(c), A(b)), A(d)), "and3"))
    for c in g["staged"]:
        for d in g["drug"]:
            pool.append(Candidate(And(A(c, filters=(Filter("stage", ">=", "III"),)), A(d)), "stage_and"))
    return pool


def _chain(concepts, ontology: Ontology) -> list[Candidate]:
    out = []
    ast = None
    for c in concepts:
        if c not in ontology:
            raise GenerationError(f"ontology lacks chain concept {c!r}")
        ast = Atom(c) if ast is None else And(ast, Atom(c))
        out.append(Candidate(ast, "subtype", nl_ast=Atom(c)))
    return out


def gen_query_bank(seed: int, ontology: Ontology, abstractions: list[dict], params: GeneratorParams | None = None,
                   *, kb: KnowledgeBase | None = None, min_per_category: int = 3,
                   alpha: int = DEFAULT_ALPHA, beta: int = DEFAULT_BETA) -> list[QueryRecord]:
    params = params or GeneratorParams(seed=seed)
    n = params.n_queries
    rng = random.Random(f"{seed}:queries")
    kb = kb or build_kb_from_abstractions(abstractions, ontology)
    size_cache: dict[str, int] = {}

    def size(c: Candidate) -> int:
        key = to_text(c.ast)
        if key not in size_cache:
            size_cache[key] = len(execute(c.ast, kb))
        return size_cache[key]

    def cat(c: Candidate) -> str:
        return categorize(size(c), alpha, beta)

    selected: list[Candidate] = []
    seen: dict[str, int] = {}

    def add(c: Candidate) -> int:
        key = c.squerl_text()
        if key in seen:
            return seen[key]
        selected.append(c)
        seen[key] = len(selected) - 1
        return seen[key]

    # subtype chains (the therapy chain has length five)
    for chain in (THERAPY_CHAIN,) + CONDITION_CHAINS:
        prev = None
        for c in _chain(chain, ontology):
            idx = add(c)
            if prev is not None and ("child_of", prev) not in selected[idx].relations:
                selected[idx].relations.append(("child_of", prev))
            prev = idx
    if len(selected) > n:
        raise GenerationError(f"n_queries={n} cannot hold the {len(selected)} subtype-chain queries")

    budget = n - len(selected)
    n_zero = min(budget, int(round(n * params.zero_result_fraction)))
    n_pairs = max(1, budget // 16) if budget >= 6 else 0

    pool = candidate_pool(ontology)
    rng.shuffle(pool)
    nonzero = [c for c in pool if size(c) > 0]
    zero = [c for c in pool if size(c) == 0]

    # paraphrase pairs: same query, a synonym in place of the canonical name
    synonyms = [c for c in nonzero if c.family in ("single", "and")
                and any(len(ontology.concepts[a.concept].surface_forms) > 1 for a in atoms(c.ast))]
    # single drug names first (brand/generic pairs), then the rest
    synonyms.sort(key=lambda c: (c.family != "single", "systemic_therapy" not in
                                 ontology.ancestors(next(atoms(c.ast)).concept)))
    made = 0
    for c in synonyms:
        if made >= n_pairs or len(selected) + 2 > n - n_zero:
            break
        if to_text(c.ast) in seen:
            continue
        alt = {}
        for a in atoms(c.ast):
            forms = ontology.concepts[a.concept].surface_forms
            if len(forms) > 1:
                alt[a.concept] = rng.choice(forms[1:])
        base = add(Candidate(c.ast, c.family))
        para = add(Candidate(c.ast, "paraphrase", surface=alt))
        selected[para].relations.append(("paraphrase_of", base))
        made += 1

    # intersection pairs: a base query and the same query narrowed by one more atom
    made = 0
    bases = [c for c in nonzero if c.family == "single" and cat(c) in (BROAD, NARROW)]
    for c in bases:
        if made >= n_pairs or len(selected) + 2 > n - n_zero:
            break
        extras = [x for x in nonzero if x.family == "and" and isinstance(x.ast, And) and x.ast.left == c.ast]
        if not extras:
            continue
        ext = rng.choice(extras)
        base = add(Candidate(c.ast, c.family))
        cplx = add(Candidate(ext.ast, "intersection"))
        selected[cplx].relations.append(("intersection_of", base))
        made += 1

    # zero-result queries, spread over families
    by_family: dict[str, list[Candidate]] = {}
    for c in zero:
        by_family.setdefault(c.family, []).append(c)
    zero_target = len(selected) + n_zero
    families = sorted(by_family)
    while len(selected) < zero_target and any(by_family.values()):
        for fam in families:
            if by_family[fam] and len(selected) < zero_target:
                add(by_family[fam].pop())
    if len(selected) < zero_target:
        raise GenerationError(f"only {len(selected) - (zero_target - n_zero)} zero-result combinations exist; "
                              f"{n_zero} requested")

    # fill: minimum per category first, then balanced draws
    by_cat: dict[str, list[Candidate]] = {BROAD: [], NARROW: [], SPARSE: []}
    for c in nonzero:
        by_cat[cat(c)].append(c)
    have = {k: sum(1 for s in selected if cat(s) == k) for k in (BROAD, NARROW, SPARSE, ZERO)}
    for k in (BROAD, NARROW, SPARSE):
        while have[k] < min_per_category and by_cat[k] and len(selected) < n:
            before = len(selected)
            add(by_cat[k].pop())
            have[k] += len(selected) - before
    cycle = itertools.cycle((BROAD, NARROW, SPARSE, NARROW, SPARSE))
    stalls = 0
    while len(selected) < n and stalls < 5:
        k = next(cycle)
        if not by_cat[k]:
            stalls += 1
            continue
        stalls = 0
        add(by_cat[k].pop())
    if len(selected) < n:
        raise GenerationError(f"candidate pool exhausted at {len(selected)} of {n} queries")

    counts = {k: sum(1 for s in selected if cat(s) == k) for k in (BROAD, NARROW, SPARSE, ZERO)}
    short = [k for k, v in counts.items() if v < min_per_category]
    if short:
        raise GenerationError(f"category coverage not met: {counts} (need >= {min_per_category} each); "
                              "adjust n_patients or n_queries")

    width = max(3, len(str(len(selected))))
    ids = [f"Q{i + 1:0{width}d}" for i in range(len(selected))]
    records = []
    for i, c in enumerate(selected):
        records.append(QueryRecord(
            query_id=ids[i],
            nl_text=c.nl_text(ontology),
            squerl_text=c.squerl_text(),
            expert_class=expert_class(c.ast, ontology),
            relations=[(k, ids[j]) for k, j in c.relations],
            zero_result=size(c) == 0,
        ))
    validate_bank(records, ontology)
    return records
