"""Compiling polymorphic relations down to the monomorphic core.

Two lowering modes produce a monomorphic program ready for tabulation:

* ``monomorphize`` instantiates every polymorphic relation once per
  distinct concrete type substitution reached from the monomorphic
  relations, and rewrites each call to name its instance directly.

* ``large-enough`` instead builds, per polymorphic relation, one instance
  whose type-variable sizes are the relation's occurrence bound (the most
  holes of that variable any value environment in the body can contain).
  Calls at sizes at or above the bound are compiled into a call to that
  single instance plus generated code forcing the fresh instance-side
  arguments to carry the same *equality pattern* as the original
  arguments: identical non-variable structure, and the same
  equal/disequal relationships between the variable-typed pieces
  (the holes).  Calls below the bound, and calls whose arguments cannot
  be typed generically, fall back to monomorphization.  The technique
  requires semiring addition to be idempotent: the generated wrappers
  sum over many equivalent witnesses and must not change the weight.

Hole bookkeeping uses the occurrence count as a static slot allocator:
within a sum type both branches share the same slots (a value only ever
realizes one branch, so a max suffices), while a product concatenates its
components' slots.  Slots that the realized branch does not populate stay
unconstrained in the generated code, which is harmless for the same
idempotence reason.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

from .semiring import SemiringSpec
from .syntax import (
    Call, Conj, Disj, Disunify, Factor, Fresh, Goal, Left, Pair, Prod,
    Program, RelationDef, Right, Sole, SOLE, Sum, TyVar, TypeExpr, Unify,
    Unit, ValueExpr, Var, render_type, _all_var_names,
)
from .typecheck import CallInfo, apply_subst, check_program
from .eval import type_size


class LoweringError(Exception):
    pass


class NotLargeEnough(LoweringError):
    """The call's sizes are below the target instance's sizes."""


class NonIdempotentSemiring(LoweringError):
    pass


class InstanceExplosion(LoweringError):
    pass


# ---------------------------------------------------------------------------
# shells and holes

@dataclass(frozen=True)
class Hole:
    tyvar: str


# A shell is a value tree whose variable-typed sub-values are Hole leaves.
Shell = object


def shell_of(t: TypeExpr, v: ValueExpr) -> Shell:
    match (t, v):
        case (TyVar(name), _):
            return Hole(name)
        case (Unit(), Sole()):
            return SOLE
        case (Sum(a, _), Left(inner, _)):
            return Left(shell_of(a, inner))
        case (Sum(_, b), Right(inner, _)):
            return Right(shell_of(b, inner))
        case (Prod(a, b), Pair(v1, v2)):
            return Pair(shell_of(a, v1), shell_of(b, v2))
    raise ValueError(f"value {v!r} does not fit type {render_type(t)}")


def holes_of(alpha: str, t: TypeExpr, v: ValueExpr) -> list[ValueExpr]:
    """Values of the alpha-holes in `v`, in-order."""
    match (t, v):
        case (TyVar(name), _):
            return [v] if name == alpha else []
        case (Unit(), Sole()):
            return []
        case (Sum(a, _), Left(inner, _)):
            return holes_of(alpha, a, inner)
        case (Sum(_, b), Right(inner, _)):
            return holes_of(alpha, b, inner)
        case (Prod(a, b), Pair(v1, v2)):
            return holes_of(alpha, a, v1) + holes_of(alpha, b, v2)
    raise ValueError(f"value {v!r} does not fit type {render_type(t)}")


def envshell(delta_types, env: dict) -> dict:
    return {x: shell_of(ty, env[x]) for x, ty in delta_types}


def envholes(alpha: str, delta_types, env: dict) -> list[ValueExpr]:
    out: list[ValueExpr] = []
    for x, ty in delta_types:
        out.extend(holes_of(alpha, ty, env[x]))
    return out


def eqpat_check(delta_types, env1: dict, env2: dict) -> bool:
    """Do two value environments carry the same equality pattern?

    True iff their shells coincide and, per type variable, positions i, j
    hold equal holes in one environment exactly when they do in the other.
    """
    delta_types = tuple(delta_types)
    if envshell(delta_types, env1) != envshell(delta_types, env2):
        return False
    tyvars: list[str] = []
    for _, ty in delta_types:
        for tv in _type_tyvars(ty):
            if tv not in tyvars:
                tyvars.append(tv)
    for alpha in tyvars:
        hs1 = envholes(alpha, delta_types, env1)
        hs2 = envholes(alpha, delta_types, env2)
        assert len(hs1) == len(hs2)  # shells agree, so hole counts agree
        for i in range(len(hs1)):
            for j in range(i + 1, len(hs1)):
                if (hs1[i] == hs1[j]) != (hs2[i] == hs2[j]):
                    return False
    return True


def _type_tyvars(t: TypeExpr) -> list[str]:
    match t:
        case TyVar(name):
            return [name]
        case Sum(a, b) | Prod(a, b):
            return _type_tyvars(a) + _type_tyvars(b)
        case _:
            return []


# ---------------------------------------------------------------------------
# occurrence counting

def count_type(alpha: str, t: TypeExpr) -> int:
    match t:
        case Unit():
            return 0
        case TyVar(name):
            return 1 if name == alpha else 0
        case Sum(a, b):
            return max(count_type(alpha, a), count_type(alpha, b))
        case Prod(a, b):
            return count_type(alpha, a) + count_type(alpha, b)
    raise TypeError(t)


def count_env(alpha: str, delta_types) -> int:
    return sum(count_type(alpha, ty) for _, ty in delta_types)


def count_goal(alpha: str, g: Goal, delta_types) -> int:
    delta_types = tuple(delta_types)
    match g:
        case Conj(a, b) | Disj(a, b):
            return max(count_goal(alpha, a, delta_types),
                       count_goal(alpha, b, delta_types))
        case Fresh(x, ty, body):
            return count_goal(alpha, body, delta_types + ((x, ty),))
        case _:
            return count_env(alpha, delta_types)


def count_relation(alpha: str, rel: RelationDef) -> int:
    return count_goal(alpha, rel.body, rel.params)


def canonical_type(n: int) -> TypeExpr:
    """The size-n stand-in type: a right-nested sum of n Units."""
    if n < 1:
        raise ValueError("types must have at least one value")
    t: TypeExpr = Unit()
    for _ in range(n - 1):
        t = Sum(Unit(), t)
    return t


def smallest_large_enough(rel: RelationDef) -> dict[str, int]:
    """Size per type variable at which one instance determines all larger ones."""
    return {tv: max(1, count_relation(tv, rel)) for tv in rel.tyvars}


# ---------------------------------------------------------------------------
# instantiation

def _subst_value(sigma: dict, v: ValueExpr) -> ValueExpr:
    match v:
        case Left(inner, annot):
            return Left(_subst_value(sigma, inner),
                        None if annot is None else apply_subst(sigma, annot))
        case Right(inner, annot):
            return Right(_subst_value(sigma, inner),
                         None if annot is None else apply_subst(sigma, annot))
        case Pair(a, b):
            return Pair(_subst_value(sigma, a), _subst_value(sigma, b))
        case _:
            return v


def _subst_goal(sigma: dict, g: Goal) -> Goal:
    match g:
        case Conj(a, b):
            return Conj(_subst_goal(sigma, a), _subst_goal(sigma, b))
        case Disj(a, b):
            return Disj(_subst_goal(sigma, a), _subst_goal(sigma, b))
        case Fresh(x, ty, body):
            return Fresh(x, apply_subst(sigma, ty), _subst_goal(sigma, body))
        case Unify(v1, v2, ty):
            return Unify(_subst_value(sigma, v1), _subst_value(sigma, v2),
                         None if ty is None else apply_subst(sigma, ty))
        case Disunify(v1, v2, ty):
            return Disunify(_subst_value(sigma, v1), _subst_value(sigma, v2),
                            None if ty is None else apply_subst(sigma, ty))
        case Call(rel, args, info):
            new_info = info
            if isinstance(info, CallInfo):
                new_info = replace(info, subst=tuple(
                    (tv, apply_subst(sigma, ty)) for tv, ty in info.subst))
            return Call(rel, tuple(_subst_value(sigma, a) for a in args), new_info)
        case Factor(_):
            return g
    raise TypeError(g)


def instantiate_relation(rel: RelationDef, sigma: dict[str, TypeExpr],
                         name: Optional[str] = None) -> RelationDef:
    """Apply a concrete substitution through a relation definition."""
    if not sigma and name is None:
        return rel
    params = tuple((x, apply_subst(sigma, ty)) for x, ty in rel.params)
    tyvars = tuple(tv for tv in rel.tyvars if tv not in sigma)
    return RelationDef(name or rel.name, tyvars, params, _subst_goal(sigma, rel.body))


# ---------------------------------------------------------------------------
# instance bookkeeping

@dataclass(frozen=True)
class InstanceKey:
    rel: str
    sizes: tuple[tuple[str, int], ...]  # per tyvar, in declaration order


def mangle(rel: str, sizes: tuple[int, ...]) -> str:
    return f"{rel}${'_'.join(str(n) for n in sizes)}" if sizes else rel


class _NameSupply:
    def __init__(self, used: set[str]):
        self.used = set(used)
        self.counter = 0

    def fresh(self, base: str) -> str:
        while True:
            self.counter += 1
            cand = f"{base}~{self.counter}"
            if cand not in self.used:
                self.used.add(cand)
                return cand

    def relation_name(self, base: str) -> str:
        if base not in self.used:
            self.used.add(base)
            return base
        k = 1
        while f"{base}#{k}" in self.used:
            k += 1
        name = f"{base}#{k}"
        self.used.add(name)
        return name


MAX_INSTANCES = 10000
MAX_TYVAR_SIZE = 4096


class _Lowering:
    def __init__(self, program: Program, mode: str, spec: SemiringSpec,
                 max_instances: int = MAX_INSTANCES,
                 max_tyvar_size: int = MAX_TYVAR_SIZE):
        self.source = {rel.name: rel for rel in program.relations}
        self.mode = mode
        self.spec = spec
        self.max_instances = max_instances
        self.max_tyvar_size = max_tyvar_size
        used = set(self.source)
        for rel in program.relations:
            used.update(x for x, _ in rel.params)
            used.update(_all_var_names(rel.body))
        self.names = _NameSupply(used)
        # (rel, concrete types per tyvar) -> mangled name
        self.instances: dict[tuple[str, tuple[TypeExpr, ...]], str] = {}
        self.order: list[tuple[str, tuple[TypeExpr, ...], str]] = []
        self.pending: deque = deque()
        self.notes: list[str] = []

    def demand(self, rel: str, sigma_types: tuple[TypeExpr, ...]) -> str:
        key = (rel, sigma_types)
        if key in self.instances:
            return self.instances[key]
        sizes = tuple(type_size(t) for t in sigma_types)
        if any(n > self.max_tyvar_size for n in sizes):
            raise InstanceExplosion(
                f"instance of {rel} needs a type variable of size {max(sizes)}; "
                f"polymorphic recursion appears to grow types without bound"
            )
        if len(self.instances) >= self.max_instances:
            raise InstanceExplosion(
                f"more than {self.max_instances} relation instances requested"
            )
        name = self.names.relation_name(mangle(rel, sizes))
        self.instances[key] = name
        self.order.append((rel, sigma_types, name))
        self.pending.append(key)
        return name

    def rewrite_call(self, g: Call) -> Goal:
        info = g.info
        assert isinstance(info, CallInfo), "lowering requires a checked program"
        callee = self.source[g.rel]
        if not callee.tyvars:
            return Call(g.rel, g.args, None)
        sigma_types = tuple(dict(info.subst)[tv] for tv in callee.tyvars)
        if self.mode == "monomorphize":
            return Call(self.demand(g.rel, sigma_types), g.args, None)

        target_sizes = smallest_large_enough(callee)
        call_sizes = {tv: type_size(t) for tv, t in zip(callee.tyvars, sigma_types)}
        if info.generic_env is None:
            self.notes.append(f"{g.rel}: non-generic call, monomorphized")
            return Call(self.demand(g.rel, sigma_types), g.args, None)
        if any(call_sizes[tv] < target_sizes[tv] for tv in callee.tyvars):
            self.notes.append(f"{g.rel}: call below large-enough sizes, monomorphized")
            return Call(self.demand(g.rel, sigma_types), g.args, None)
        target_types = tuple(canonical_type(target_sizes[tv]) for tv in callee.tyvars)
        target_name = self.demand(g.rel, target_types)
        if sigma_types == target_types:
            return Call(target_name, g.args, None)
        sigma2 = dict(zip(callee.tyvars, target_types))
        return compile_call(g, target_name, sigma2, self.names)

    def rewrite_goal(self, g: Goal) -> Goal:
        match g:
            case Conj(a, b):
                return Conj(self.rewrite_goal(a), self.rewrite_goal(b))
            case Disj(a, b):
                return Disj(self.rewrite_goal(a), self.rewrite_goal(b))
            case Fresh(x, ty, body):
                return Fresh(x, ty, self.rewrite_goal(body))
            case Call():
                return self.rewrite_call(g)
            case _:
                return g


# ---------------------------------------------------------------------------
# equality-pattern code generation

def enforce_eqpat_codegen(delta_generic, vars1: dict, vars2: dict,
                          sigma1: dict, sigma2: dict, supply: _NameSupply) -> Goal:
    """Goal that holds exactly when the `vars1` and `vars2` variable
    families carry the same equality pattern over `delta_generic`.

    Both families are deconstructed into freshly bound ancillary hole
    variables (one family per side, typed under the side's substitution),
    then every hole pair is forced to agree on equality/disequality.
    Hole slots are allocated by the occurrence count: sum branches share
    slots, product components concatenate them.
    """
    delta_generic = tuple(delta_generic)
    tyvars: list[str] = []
    for _, ty in delta_generic:
        for tv in _type_tyvars(ty):
            if tv not in tyvars:
                tyvars.append(tv)
    slots = {tv: count_env(tv, delta_generic) for tv in tyvars}
    h1 = {tv: [supply.fresh("h") for _ in range(slots[tv])] for tv in tyvars}
    h2 = {tv: [supply.fresh("h") for _ in range(slots[tv])] for tv in tyvars}

    def deconstruct(ty: TypeExpr, e1: ValueExpr, e2: ValueExpr,
                    bases: dict[str, int]) -> list[Goal]:
        match ty:
            case Unit():
                return []
            case TyVar(name):
                i = bases[name]
                bases[name] += 1
                return [Unify(e1, Var(h1[name][i])), Unify(e2, Var(h2[name][i]))]
            case Prod(a, b):
                c1, c2 = supply.fresh("p"), supply.fresh("p")
                d1, d2 = supply.fresh("p"), supply.fresh("p")
                goals = [
                    Unify(e1, Pair(Var(c1), Var(d1))),
                    Unify(e2, Pair(Var(c2), Var(d2))),
                ]
                goals += deconstruct(a, Var(c1), Var(c2), bases)
                goals += deconstruct(b, Var(d1), Var(d2), bases)
                inner = _conj(goals)
                for name_, ty_ in ((d2, apply_subst(sigma2, b)),
                                   (d1, apply_subst(sigma1, b)),
                                   (c2, apply_subst(sigma2, a)),
                                   (c1, apply_subst(sigma1, a))):
                    inner = Fresh(name_, ty_, inner)
                return [inner]
            case Sum(a, b):
                base_l = dict(bases)
                base_r = dict(bases)
                l1, l2 = supply.fresh("c"), supply.fresh("c")
                left_goals = [
                    Unify(e1, Left(Var(l1))),
                    Unify(e2, Left(Var(l2))),
                ] + deconstruct(a, Var(l1), Var(l2), base_l)
                left_branch = Fresh(l1, apply_subst(sigma1, a),
                                    Fresh(l2, apply_subst(sigma2, a),
                                          _conj(left_goals)))
                r1, r2 = supply.fresh("c"), supply.fresh("c")
                right_goals = [
                    Unify(e1, Right(Var(r1))),
                    Unify(e2, Right(Var(r2))),
                ] + deconstruct(b, Var(r1), Var(r2), base_r)
                right_branch = Fresh(r1, apply_subst(sigma1, b),
                                     Fresh(r2, apply_subst(sigma2, b),
                                           _conj(right_goals)))
                # both branches draw from the same slots
                for tv in bases:
                    bases[tv] += count_type(tv, ty)
                return [Disj(left_branch, right_branch)]
        raise TypeError(ty)

    goals: list[Goal] = []
    bases = {tv: 0 for tv in tyvars}
    for x, ty in delta_generic:
        goals += deconstruct(ty, Var(vars1[x]), Var(vars2[x]), bases)
    assert bases == slots

    for tv in tyvars:
        for i in range(slots[tv]):
            for j in range(i + 1, slots[tv]):
                a1, b1 = Var(h1[tv][i]), Var(h1[tv][j])
                a2, b2 = Var(h2[tv][i]), Var(h2[tv][j])
                goals.append(Disj(
                    Conj(Unify(a1, b1), Unify(a2, b2)),
                    Conj(Disunify(a1, b1), Disunify(a2, b2)),
                ))

    body = _conj(goals)
    for tv in reversed(tyvars):
        for name in reversed(h2[tv]):
            body = Fresh(name, apply_subst(sigma2, TyVar(tv)), body)
        for name in reversed(h1[tv]):
            body = Fresh(name, apply_subst(sigma1, TyVar(tv)), body)
    return body


def _conj(goals: list[Goal]) -> Goal:
    if not goals:
        return Unify(SOLE, SOLE)  # trivial success
    node = goals[-1]
    for g in reversed(goals[:-1]):
        node = Conj(g, node)
    return node


def compile_call(call: Call, target_name: str, sigma2: dict[str, TypeExpr],
                 supply: _NameSupply) -> Goal:
    """Rewrite a large-enough polymorphic call into a call to the target
    instance over fresh copies of the argument variables, conjoined with
    the generated equality-pattern enforcement between the original
    variables and the copies."""
    info = call.info
    assert isinstance(info, CallInfo) and info.generic_env is not None
    sigma1 = info.subst_dict()
    generic_env = info.generic_env

    vars1 = {x: x for x, _ in generic_env}
    vars2 = {x: supply.fresh(x) for x, _ in generic_env}

    renamed_args = tuple(
        _subst_value(sigma2, _rename_value(a, vars2)) for a in info.generic_args
    )
    inner = Conj(
        Call(target_name, renamed_args, None),
        enforce_eqpat_codegen(generic_env, vars1, vars2, sigma1, sigma2, supply),
    )
    body: Goal = inner
    for x, ty in reversed(generic_env):
        body = Fresh(vars2[x], apply_subst(sigma2, ty), body)
    return body


def _rename_value(v: ValueExpr, mapping: dict[str, str]) -> ValueExpr:
    match v:
        case Var(name):
            return Var(mapping.get(name, name))
        case Left(inner, annot):
            return Left(_rename_value(inner, mapping), annot)
        case Right(inner, annot):
            return Right(_rename_value(inner, mapping), annot)
        case Pair(a, b):
            return Pair(_rename_value(a, mapping), _rename_value(b, mapping))
        case _:
            return v


# ---------------------------------------------------------------------------
# whole-program lowering

def lower_program(p: Program, mode: str, spec: SemiringSpec,
                  max_instances: int = MAX_INSTANCES,
                  max_tyvar_size: int = MAX_TYVAR_SIZE,
                  notes: Optional[list] = None) -> Program:
    """Produce a monomorphic program whose tables agree with `p`'s.

    The result is re-checked under the base typing rules before being
    returned, so downstream evaluation can rely on its annotations.
    """
    if mode not in ("monomorphize", "large-enough"):
        raise ValueError(f"unknown poly mode {mode!r}")
    if mode == "large-enough" and not spec.idempotent_add:
        raise NonIdempotentSemiring(
            f"the large-enough pipeline needs idempotent addition; "
            f"the {spec.name} semiring does not have it"
        )
    ctx = _Lowering(p, mode, spec, max_instances, max_tyvar_size)
    out: list[RelationDef] = []
    for rel in p.relations:
        if not rel.tyvars:
            out.append(RelationDef(rel.name, (), rel.params,
                                   ctx.rewrite_goal(rel.body)))
    done: set = set()
    while ctx.pending:
        key = ctx.pending.popleft()
        if key in done:
            continue
        done.add(key)
        relname, sigma_types = key
        name = ctx.instances[key]
        source = ctx.source[relname]
        sigma = dict(zip(source.tyvars, sigma_types))
        inst = instantiate_relation(source, sigma, name)
        out.append(RelationDef(inst.name, (), inst.params,
                               ctx.rewrite_goal(inst.body)))
    if notes is not None:
        notes.extend(ctx.notes)
    return check_program(Program(tuple(out)))


def collect_instances(p: Program, mode: str,
                      spec: Optional[SemiringSpec] = None,
                      max_instances: int = MAX_INSTANCES,
                      max_tyvar_size: int = MAX_TYVAR_SIZE) -> set[InstanceKey]:
    """The instance keys the lowered program will contain: one per
    monomorphic relation (empty sizes) plus one per generated instance."""
    from .semiring import BOOLEAN
    spec = spec or BOOLEAN
    ctx = _Lowering(p, mode, spec, max_instances, max_tyvar_size)
    for rel in p.relations:
        if not rel.tyvars:
            ctx.rewrite_goal(rel.body)
    done: set = set()
    while ctx.pending:
        key = ctx.pending.popleft()
        if key in done:
            continue
        done.add(key)
        relname, sigma_types = key
        source = ctx.source[relname]
        sigma = dict(zip(source.tyvars, sigma_types))
        inst = instantiate_relation(source, sigma, ctx.instances[key])
        ctx.rewrite_goal(inst.body)
    keys = {InstanceKey(rel.name, ()) for rel in p.relations if not rel.tyvars}
    for (relname, sigma_types), _ in ctx.instances.items():
        source = ctx.source[relname]
        sizes = tuple((tv, type_size(t))
                      for tv, t in zip(source.tyvars, sigma_types))
        keys.add(InstanceKey(relname, sizes))
    return keys
