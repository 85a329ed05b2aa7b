"""Typing judgements for values, goals, relations, and programs.

Checking rewrites the AST: sum-constructor annotations are filled in,
every ``==``/``=/=`` records its common argument type, and every relation
call records a :class:`CallInfo` carrying the inferred type-variable
substitution plus (when the call is "generic enough") a pre-substitution
typing of the caller variables appearing in the arguments.  That generic
environment is what the non-monomorphizing lowering later needs to stitch
a call to a differently-sized relation instance.

Call-site inference is one-way matching, not unification: argument types
are always fully known in the caller's context, so matching the declared
parameter types against them yields the unique substitution when one
exists.  A relation header must mention each of its type variables in at
least one parameter type; otherwise calls could never determine the
substitution and instances would be ambiguous.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .syntax import (
    Call, Conj, Disj, Disunify, Factor, Fresh, Goal, Left, Pair, Prod,
    Program, RelationDef, Right, Sole, Sum, TyVar, TypeExpr, Unify, Unit,
    UNIT, ValueExpr, Var, free_type_vars, render_type, render_value_expr,
)


class TypeCheckError(Exception):
    pass


class UninferableValue(TypeCheckError):
    """A bare left/right whose sum type cannot be determined here."""


class NonGenericCall(TypeCheckError):
    """The call's arguments cannot be typed generically against the callee
    header; the lowering falls back to monomorphizing this call."""


@dataclass(frozen=True)
class TypeEnv:
    vars: tuple[tuple[str, TypeExpr], ...] = ()
    tyvars: frozenset = frozenset()

    def bind(self, name: str, ty: TypeExpr) -> "TypeEnv":
        return TypeEnv(self.vars + ((name, ty),), self.tyvars)

    def lookup(self, name: str) -> TypeExpr:
        for x, ty in self.vars:
            if x == name:
                return ty
        raise TypeCheckError(f"unbound variable {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(x == name for x, _ in self.vars)


@dataclass(frozen=True)
class RelSig:
    tyvars: tuple[str, ...]
    params: tuple[TypeExpr, ...]


RelEnv = dict  # name -> RelSig


@dataclass(frozen=True)
class CallInfo:
    rel: str
    tyvars: tuple[str, ...]                 # callee type variables, declaration order
    params: tuple[TypeExpr, ...]            # declared (pre-substitution) parameter types
    subst: tuple[tuple[str, TypeExpr], ...]  # tyvar -> caller-context type
    generic_env: Optional[tuple[tuple[str, TypeExpr], ...]] = None
    generic_args: Optional[tuple[ValueExpr, ...]] = None

    def subst_dict(self) -> dict[str, TypeExpr]:
        return dict(self.subst)


# ---------------------------------------------------------------------------
# substitutions and matching

def apply_subst(subst: dict[str, TypeExpr], t: TypeExpr) -> TypeExpr:
    match t:
        case TyVar(name):
            return subst.get(name, t)
        case Sum(a, b):
            return Sum(apply_subst(subst, a), apply_subst(subst, b))
        case Prod(a, b):
            return Prod(apply_subst(subst, a), apply_subst(subst, b))
        case _:
            return t


def match_type(pattern: TypeExpr, actual: TypeExpr, binding: dict[str, TypeExpr],
               tyvars: frozenset) -> None:
    """Extend `binding` so that the substitution maps `pattern` onto `actual`.

    Only variables in `tyvars` are pattern variables; anything else must
    match structurally.
    """
    match pattern:
        case TyVar(name) if name in tyvars:
            if name in binding:
                if binding[name] != actual:
                    raise TypeCheckError(
                        f"type variable {name} matched to both "
                        f"{render_type(binding[name])} and {render_type(actual)}"
                    )
            else:
                binding[name] = actual
        case Unit() if isinstance(actual, Unit):
            pass
        case Sum(a, b) if isinstance(actual, Sum):
            match_type(a, actual.left, binding, tyvars)
            match_type(b, actual.right, binding, tyvars)
        case Prod(a, b) if isinstance(actual, Prod):
            match_type(a, actual.first, binding, tyvars)
            match_type(b, actual.second, binding, tyvars)
        case TyVar(name) if isinstance(actual, TyVar) and actual.name == name:
            # a caller type variable used verbatim in the pattern position
            pass
        case _:
            raise TypeCheckError(
                f"cannot match {render_type(pattern)} against {render_type(actual)}"
            )


def infer_call_subst(callee_sig: tuple[tuple[str, ...], tuple[TypeExpr, ...]],
                     arg_types: tuple[TypeExpr, ...]) -> dict[str, TypeExpr]:
    """One-way match of declared parameter types against argument types."""
    tyvars, params = callee_sig
    if len(params) != len(arg_types):
        raise TypeCheckError(f"expected {len(params)} arguments, got {len(arg_types)}")
    binding: dict[str, TypeExpr] = {}
    for p, a in zip(params, arg_types):
        match_type(p, a, binding, frozenset(tyvars))
    for tv in tyvars:
        if tv not in binding:
            raise TypeCheckError(f"type variable {tv} is unconstrained by the arguments")
    assert all(apply_subst(binding, p) == a for p, a in zip(params, arg_types))
    return binding


# ---------------------------------------------------------------------------
# type validity and value typing

def check_type_valid(env: TypeEnv, t: TypeExpr) -> None:
    match t:
        case TyVar(name):
            if name not in env.tyvars:
                raise TypeCheckError(f"unbound type variable {name}")
        case Sum(a, b) | Prod(a, b):
            check_type_valid(env, a)
            check_type_valid(env, b)
        case Unit():
            pass


def annotate_value(env: TypeEnv, v: ValueExpr,
                   expected: Optional[TypeExpr] = None) -> tuple[ValueExpr, TypeExpr]:
    """Type a value, filling in sum-constructor annotations.

    `expected` drives inference for bare left/right; when both an
    annotation and an expectation are present they must agree.
    """
    match v:
        case Sole():
            if expected is not None and expected != UNIT:
                raise TypeCheckError(f"sole has type Unit, expected {render_type(expected)}")
            return v, UNIT
        case Var(name):
            ty = env.lookup(name)
            if expected is not None and expected != ty:
                raise TypeCheckError(
                    f"{name} has type {render_type(ty)}, expected {render_type(expected)}"
                )
            return v, ty
        case Left(inner, annot) | Right(inner, annot):
            is_left = isinstance(v, Left)
            target = annot if annot is not None else expected
            if target is None:
                raise UninferableValue(
                    f"cannot infer the sum type of {render_value_expr(v)}; annotate it"
                )
            if annot is not None:
                check_type_valid(env, annot)
                if expected is not None and annot != expected:
                    raise TypeCheckError(
                        f"annotation {render_type(annot)} does not match "
                        f"expected {render_type(expected)}"
                    )
            if not isinstance(target, Sum):
                raise TypeCheckError(
                    f"{'left' if is_left else 'right'} constructor needs a Sum type, "
                    f"got {render_type(target)}"
                )
            side = target.left if is_left else target.right
            inner2, _ = annotate_value(env, inner, side)
            return (Left(inner2, target) if is_left else Right(inner2, target)), target
        case Pair(a, b):
            if expected is None:
                ea, eb = None, None
            elif isinstance(expected, Prod):
                ea, eb = expected.first, expected.second
            else:
                raise TypeCheckError(f"pair value cannot have type {render_type(expected)}")
            a2, ta = annotate_value(env, a, ea)
            b2, tb = annotate_value(env, b, eb)
            return Pair(a2, b2), Prod(ta, tb)
    raise TypeError(v)


def type_of_value(env: TypeEnv, v: ValueExpr,
                  expected: Optional[TypeExpr] = None) -> TypeExpr:
    return annotate_value(env, v, expected)[1]


# ---------------------------------------------------------------------------
# generic typing of call arguments

def _generic_walk(pattern: TypeExpr, v: ValueExpr, env: TypeEnv,
                  sigma: dict[str, TypeExpr], assign: dict[str, TypeExpr]) -> None:
    match v:
        case Var(name):
            actual = env.lookup(name)
            if name in assign:
                if assign[name] != pattern:
                    raise NonGenericCall(
                        f"{name} occurs at generic types {render_type(assign[name])} "
                        f"and {render_type(pattern)}"
                    )
            else:
                assert apply_subst(sigma, pattern) == actual
                assign[name] = pattern
        case Sole():
            if isinstance(pattern, TyVar):
                raise NonGenericCall("constructor at a type-variable position")
        case Left(inner, _):
            if not isinstance(pattern, Sum):
                raise NonGenericCall("constructor at a type-variable position")
            _generic_walk(pattern.left, inner, env, sigma, assign)
        case Right(inner, _):
            if not isinstance(pattern, Sum):
                raise NonGenericCall("constructor at a type-variable position")
            _generic_walk(pattern.right, inner, env, sigma, assign)
        case Pair(a, b):
            if not isinstance(pattern, Prod):
                raise NonGenericCall("constructor at a type-variable position")
            _generic_walk(pattern.first, a, env, sigma, assign)
            _generic_walk(pattern.second, b, env, sigma, assign)


def generic_arg_env(call: Call, caller_env: TypeEnv) -> tuple[tuple[str, TypeExpr], ...]:
    """Give each caller variable free in the call's arguments a type over
    the callee's type variables, consistent with the call substitution.

    Raises NonGenericCall when no such typing exists (a variable at two
    incompatible generic positions, or a constructor at a type-variable
    position); the lowering then monomorphizes this call instead.
    """
    info = call.info
    assert isinstance(info, CallInfo), "call must be type-checked first"
    sigma = info.subst_dict()
    assign: dict[str, TypeExpr] = {}
    for pattern, arg in zip(info.params, call.args):
        _generic_walk(pattern, arg, caller_env, sigma, assign)
    return tuple((x, assign[x]) for x, _ in caller_env.vars if x in assign)


def _generic_args(call: Call, generic_env: tuple[tuple[str, TypeExpr], ...],
                  callee_tyvars: tuple[str, ...]) -> tuple[ValueExpr, ...]:
    env = TypeEnv(generic_env, frozenset(callee_tyvars))
    out = []
    for pattern, arg in zip(call.info.params, call.args):
        ann, _ = annotate_value(env, _strip_annots(arg), pattern)
        out.append(ann)
    return tuple(out)


def _strip_annots(v: ValueExpr) -> ValueExpr:
    match v:
        case Left(inner, _):
            return Left(_strip_annots(inner), None)
        case Right(inner, _):
            return Right(_strip_annots(inner), None)
        case Pair(a, b):
            return Pair(_strip_annots(a), _strip_annots(b))
        case _:
            return v


# ---------------------------------------------------------------------------
# goal / relation / program checking

_MARK = "\x00"  # internal suffix keeping callee tyvars apart from the caller's


def _contains_marked(t: TypeExpr) -> bool:
    return any(name.endswith(_MARK) for name in free_type_vars(t))


def _check_call(relenv: RelEnv, env: TypeEnv, g: Call) -> Call:
    if g.rel not in relenv:
        raise TypeCheckError(f"call to undefined relation {g.rel!r}")
    sig = relenv[g.rel]
    if len(sig.params) != len(g.args):
        raise TypeCheckError(
            f"{g.rel} takes {len(sig.params)} arguments, got {len(g.args)}"
        )

    # Callee type variables are renamed apart while matching so they can
    # never be confused with caller type variables of the same name.
    marked = {tv: TyVar(tv + _MARK) for tv in sig.tyvars}
    params_m = tuple(apply_subst(marked, p) for p in sig.params)
    marked_names = frozenset(tv + _MARK for tv in sig.tyvars)

    binding: dict[str, TypeExpr] = {}
    ann_args: list[Optional[ValueExpr]] = [None] * len(g.args)
    arg_types: list[Optional[TypeExpr]] = [None] * len(g.args)
    pending = set(range(len(g.args)))
    progress = True
    while pending and progress:
        progress = False
        for i in sorted(pending):
            expect = apply_subst(binding, params_m[i])
            if not _contains_marked(expect):
                ann, ty = annotate_value(env, g.args[i], expect)
            else:
                try:
                    ann, ty = annotate_value(env, g.args[i], None)
                except UninferableValue:
                    continue
            match_type(params_m[i], ty, binding, marked_names)
            ann_args[i], arg_types[i] = ann, ty
            pending.discard(i)
            progress = True
    if pending:
        i = sorted(pending)[0]
        raise TypeCheckError(
            f"cannot determine the type of argument {i + 1} in call to {g.rel}; "
            f"annotate its sum constructors"
        )

    subst = infer_call_subst((tuple(marked_names), params_m), tuple(arg_types))
    sigma = {tv: subst[tv + _MARK] for tv in sig.tyvars}
    info = CallInfo(
        rel=g.rel,
        tyvars=sig.tyvars,
        params=sig.params,
        subst=tuple((tv, sigma[tv]) for tv in sig.tyvars),
    )
    checked = Call(g.rel, tuple(ann_args), info)
    try:
        generic_env = generic_arg_env(checked, env)
        generic_args = _generic_args(checked, generic_env, sig.tyvars)
        info = replace(info, generic_env=generic_env, generic_args=generic_args)
        checked = Call(g.rel, tuple(ann_args), info)
    except NonGenericCall:
        pass
    return checked


def check_goal(relenv: RelEnv, env: TypeEnv, g: Goal) -> Goal:
    match g:
        case Conj(a, b):
            return Conj(check_goal(relenv, env, a), check_goal(relenv, env, b))
        case Disj(a, b):
            return Disj(check_goal(relenv, env, a), check_goal(relenv, env, b))
        case Fresh(x, ty, body):
            check_type_valid(env, ty)
            return Fresh(x, ty, check_goal(relenv, env.bind(x, ty), body))
        case Unify(v1, v2, _) | Disunify(v1, v2, _):
            try:
                a1, ty = annotate_value(env, v1, None)
                a2, _ = annotate_value(env, v2, ty)
            except UninferableValue:
                a2, ty = annotate_value(env, v2, None)
                a1, _ = annotate_value(env, v1, ty)
            ctor = Unify if isinstance(g, Unify) else Disunify
            return ctor(a1, a2, ty)
        case Call():
            return _check_call(relenv, env, g)
        case Factor(_):
            return g
    raise TypeError(g)


def relation_env(p: Program) -> RelEnv:
    return {rel.name: RelSig(rel.tyvars, tuple(ty for _, ty in rel.params))
            for rel in p.relations}


def check_relation(relenv: RelEnv, rel: RelationDef) -> RelationDef:
    env = TypeEnv(rel.params, frozenset(rel.tyvars))
    for _, ty in rel.params:
        check_type_valid(env, ty)
    in_params: set[str] = set()
    for _, ty in rel.params:
        in_params.update(free_type_vars(ty))
    for tv in rel.tyvars:
        if tv not in in_params:
            raise TypeCheckError(
                f"type variable {tv} of {rel.name} does not occur in any parameter, "
                f"so calls could never determine it"
            )
    body = check_goal(relenv, env, rel.body)
    return RelationDef(rel.name, rel.tyvars, rel.params, body)


def check_program(p: Program) -> Program:
    """Check every relation against the header environment; aggregate errors."""
    relenv = relation_env(p)
    checked = []
    errors = []
    for rel in p.relations:
        try:
            checked.append(check_relation(relenv, rel))
        except TypeCheckError as e:
            errors.append(f"{rel.name}: {e}")
    if errors:
        raise TypeCheckError("; ".join(errors))
    return Program(tuple(checked))
