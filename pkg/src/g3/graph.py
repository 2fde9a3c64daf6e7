"""Grounding-graph construction: correspondence variables and entity /
relational factors generated from a classified parse tree.

Construction is pure and deterministic; graphs are immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

from .language import ENTITY, RELATION, PATH_PREPOSITIONS, ParseTree

OBJECT = "Object"
PLACE = "Place"
PATH = "Path"
EVENT = "Event"

ENTITY_FACTOR = "EntityFactor"
RELATION_FACTOR = "RelationFactor"

MAX_RELATION_ARITY = 3


class GraphConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class GroundingVar:
    id: str
    domain_kind: str  # Object | Place | Path | Event


@dataclass(frozen=True)
class CorrespondenceVar:
    id: str
    value: int | None = None

    def __post_init__(self):
        if self.value not in (None, 0, 1):
            raise GraphConstructionError("correspondence variables are binary")


@dataclass(frozen=True)
class FactorSpec:
    id: str
    phi: str
    constituent: str
    words: tuple
    args: tuple  # grounding var ids, ordered
    kind: str  # EntityFactor | RelationFactor

    def __post_init__(self):
        if self.kind == ENTITY_FACTOR and len(self.args) != 1:
            raise GraphConstructionError("entity factors take exactly one argument")
        if self.kind == RELATION_FACTOR and not 2 <= len(self.args) <= MAX_RELATION_ARITY:
            raise GraphConstructionError(
                f"relational factors take 2..{MAX_RELATION_ARITY} arguments, "
                f"got {len(self.args)} for {self.constituent}")


class GroundingGraph:
    def __init__(self, vars: list[GroundingVar], phis: list[CorrespondenceVar],
                 factors: list[FactorSpec], tree: ParseTree):
        self.vars = tuple(vars)
        self.phis = tuple(phis)
        self.factors = tuple(factors)
        self.tree = tree
        self._var_by_id = {v.id: v for v in self.vars}
        referenced = {a for f in self.factors for a in f.args}
        for v in self.vars:
            if v.id not in referenced:
                raise GraphConstructionError(f"grounding var {v.id} is unused")

    def var(self, vid: str) -> GroundingVar:
        return self._var_by_id[vid]

    def dump(self) -> str:
        """Debug listing of variables and factors (used by golden tests)."""
        lines = ["vars:"]
        for v in self.vars:
            lines.append(f"  {v.id}: {v.domain_kind}")
        lines.append("factors:")
        for f in self.factors:
            words = " ".join(f.words)
            lines.append(f"  {f.id}[{f.kind}] \"{words}\" -> ({', '.join(f.args)})")
        return "\n".join(lines)


def _head_words(tree: ParseTree, cid: str, arg_cids: set[str]) -> tuple:
    """Leaf words of cid excluding those under the argument constituents."""
    words = []

    def walk(node_id: str):
        if node_id in arg_cids:
            return
        c = tree.node(node_id)
        if c.is_leaf:
            words.append(c.words[0])
            return
        for ch in c.children:
            walk(ch)

    walk(cid)
    return tuple(words)


def _implicit_pp_kind(words: tuple) -> str:
    for w in words:
        if w.lower() in PATH_PREPOSITIONS:
            return PATH
    return PLACE


def build_grounding_graph(tree: ParseTree) -> GroundingGraph:
    """Instantiate variables and factors from a classified parse (pre-order).

    Entity constituents get one grounding variable and a unary factor.  A VP
    relation receives an implicit Event variable as its first argument; a
    VP-attached PP receives an implicit Place/Path variable.  A PP inside a
    compound NP is merged into the compound NP's relational factor, whose
    arguments are the head NP's variable and the PP object's variable.
    """
    counter = {"g": 0, "f": 0}

    def new_var_id() -> str:
        counter["g"] += 1
        return f"g{counter['g']}"

    def new_factor_id() -> str:
        counter["f"] += 1
        return f"f{counter['f']}"

    vars: list[GroundingVar] = []
    factors: list[FactorSpec] = []
    var_of: dict[str, str] = {}  # constituent id -> grounding var id

    def add_var(kind: str) -> str:
        vid = new_var_id()
        vars.append(GroundingVar(vid, kind))
        return vid

    def add_factor(cid: str, words: tuple, args: list[str], kind: str):
        fid = new_factor_id()
        factors.append(FactorSpec(fid, f"phi{fid[1:]}", cid, words, tuple(args), kind))

    def resolve(cid: str) -> str:
        """Grounding variable a constituent contributes as an argument."""
        if cid not in var_of:
            build(cid)
        return var_of[cid]

    def build(cid: str):
        if cid in var_of:
            return
        c = tree.node(cid)
        if c.is_leaf:
            return
        if c.kind == ENTITY:
            vid = add_var(OBJECT)
            var_of[cid] = vid
            add_factor(cid, c.words, [vid], ENTITY_FACTOR)
            return
        if c.kind != RELATION:
            for ch in c.children:
                build(ch)
            return

        phrasal = tree.phrasal_children(cid)
        if c.category == "VP":
            ev = add_var(EVENT)
            var_of[cid] = ev
            args = [ev]
            for ch in phrasal:
                args.append(resolve(ch.id))
            add_factor(cid, _head_words(tree, cid, {p.id for p in phrasal}),
                       args, RELATION_FACTOR)
        elif c.category == "PP":
            nps = [p for p in phrasal if p.category in ("NP", "S", "VP")]
            own = add_var(_implicit_pp_kind(c.words))
            var_of[cid] = own
            args = [own] + [resolve(p.id) for p in nps]
            add_factor(cid, _head_words(tree, cid, {p.id for p in nps}),
                       args, RELATION_FACTOR)
        else:
            # compound NP: head NP + modifier PP(s); the PP is merged here
            head = next((p for p in phrasal if p.category == "NP"), None)
            pps = [p for p in phrasal if p.category == "PP"]
            if head is None or not pps:
                # no usable structure: treat as an entity
                vid = add_var(OBJECT)
                var_of[cid] = vid
                add_factor(cid, c.words, [vid], ENTITY_FACTOR)
                return
            head_var = resolve(head.id)
            var_of[cid] = head_var
            for pp in pps:
                inner = [p for p in tree.phrasal_children(pp.id) if p.category == "NP"]
                args = [head_var] + [resolve(p.id) for p in inner]
                add_factor(pp.id,
                           _head_words(tree, pp.id, {p.id for p in inner}),
                           args, RELATION_FACTOR)
                var_of[pp.id] = head_var

    for c in tree.preorder():
        if not c.is_leaf and c.kind is not None:
            build(c.id)

    phis = [CorrespondenceVar(f.phi) for f in factors]
    return GroundingGraph(vars, phis, factors, tree)


def shared_variable_map(graph: GroundingGraph) -> dict[str, list[str]]:
    """Inverse index: grounding var id -> factor ids that reference it."""
    out: dict[str, list[str]] = {v.id: [] for v in graph.vars}
    for f in graph.factors:
        for a in f.args:
            if f.id not in out[a]:
                out[a].append(f.id)
    return out
