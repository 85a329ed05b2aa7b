"""Bottom-up evaluation over dense semiring arrays.

Every concrete type denotes a finite, canonically ordered list of values:
Unit has the single value sole; a sum lists all lefts (in left-component
order) then all rights; a product is first-component-major.  A value's
position in that list is its index, computed in closed form:

    idx(left v)     = idx(v)
    idx(right v)    = |t1| + idx(v)
    idx(pair v1 v2) = idx(v1) * |t2| + idx(v2)

A goal under a set of in-scope variables denotes an array with one axis
per variable it mentions; conj and disj combine arrays pointwise with the
semiring operations (broadcasting over axes a subgoal does not touch),
== and =/= produce 0/1 arrays from index comparisons, a call gathers from
the called relation's table, and fresh sums an axis away.  To keep
intermediate arrays small, a fresh over a conjunction eliminates its
bound variables factor-by-factor instead of materializing the full joint
grid.

A program's tables are the least fixed point of re-evaluating every
relation against the previous round's tables, starting from tables that
are semiring-zero everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .semiring import SemiringSpec, Weight, parse_weight_literal
from .syntax import (
    Call, Conj, Disj, Disunify, Factor, Fresh, Goal, Left, Pair, Prod,
    Program, RelationDef, Right, Sole, SOLE, Sum, TyVar, TypeExpr, Unify,
    Unit, ValueExpr, Var, free_vars,
)

ValueEnv = dict  # name -> concrete ValueExpr


# ---------------------------------------------------------------------------
# types as index spaces

def type_size(t: TypeExpr) -> int:
    match t:
        case Unit():
            return 1
        case Sum(a, b):
            return type_size(a) + type_size(b)
        case Prod(a, b):
            return type_size(a) * type_size(b)
        case TyVar(name):
            raise ValueError(f"type variable {name} has no size")
    raise TypeError(t)


def enumerate_type(t: TypeExpr) -> list[ValueExpr]:
    match t:
        case Unit():
            return [SOLE]
        case Sum(a, b):
            return [Left(v) for v in enumerate_type(a)] + \
                   [Right(v) for v in enumerate_type(b)]
        case Prod(a, b):
            return [Pair(v1, v2) for v1 in enumerate_type(a) for v2 in enumerate_type(b)]
        case TyVar(name):
            raise ValueError(f"type variable {name} has no values")
    raise TypeError(t)


def value_index(v: ValueExpr, t: TypeExpr) -> int:
    match (v, t):
        case (Sole(), Unit()):
            return 0
        case (Left(inner, _), Sum(a, _)):
            return value_index(inner, a)
        case (Right(inner, _), Sum(a, b)):
            return type_size(a) + value_index(inner, b)
        case (Pair(v1, v2), Prod(a, b)):
            return value_index(v1, a) * type_size(b) + value_index(v2, b)
    raise ValueError(f"value {v!r} does not inhabit {t!r}")


def index_value(i: int, t: TypeExpr) -> ValueExpr:
    if not 0 <= i < type_size(t):
        raise ValueError(f"index {i} out of range for type of size {type_size(t)}")
    match t:
        case Unit():
            return SOLE
        case Sum(a, b):
            n = type_size(a)
            return Left(index_value(i, a)) if i < n else Right(index_value(i - n, b))
        case Prod(a, b):
            n = type_size(b)
            return Pair(index_value(i // n, a), index_value(i % n, b))
    raise TypeError(t)


def eval_value(v: ValueExpr, env: ValueEnv) -> ValueExpr:
    """Substitute the environment through a value; the result is concrete
    and carries no annotations."""
    match v:
        case Var(name):
            return env[name]
        case Left(inner, _):
            return Left(eval_value(inner, env))
        case Right(inner, _):
            return Right(eval_value(inner, env))
        case Pair(a, b):
            return Pair(eval_value(a, env), eval_value(b, env))
        case Sole():
            return v
    raise TypeError(v)


# ---------------------------------------------------------------------------
# relation tables

@dataclass
class RelTable:
    rel: str
    params: tuple[tuple[str, TypeExpr], ...]
    cells: np.ndarray

    @property
    def dims(self) -> tuple[tuple[TypeExpr, int], ...]:
        return tuple((ty, type_size(ty)) for _, ty in self.params)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(type_size(ty) for _, ty in self.params)


def zero_table(rel: RelationDef, spec: SemiringSpec) -> RelTable:
    sizes = tuple(type_size(ty) for _, ty in rel.params)
    cells = np.full(sizes, spec.zero, dtype=spec.dtype)
    return RelTable(rel.name, rel.params, cells)


# ---------------------------------------------------------------------------
# the array engine

@dataclass
class _Factor:
    dims: tuple[str, ...]
    arr: np.ndarray


def _aligned(f: _Factor, dims_out: tuple[str, ...], sizes: dict[str, int]) -> np.ndarray:
    """View a factor's array in `dims_out` order with broadcastable axes."""
    perm = [f.dims.index(d) for d in dims_out if d in f.dims]
    arr = f.arr.transpose(perm)
    shape = tuple(sizes[d] if d in f.dims else 1 for d in dims_out)
    return arr.reshape(shape)


def _combine(f1: _Factor, f2: _Factor, op, order: tuple[str, ...],
             sizes: dict[str, int]) -> _Factor:
    dims = tuple(d for d in order if d in f1.dims or d in f2.dims)
    return _Factor(dims, op(_aligned(f1, dims, sizes), _aligned(f2, dims, sizes)))


def _index_factor(v: ValueExpr, t: TypeExpr, scope: dict[str, tuple[TypeExpr, int]],
                  dims: tuple[str, ...]) -> np.ndarray:
    """Integer array over `dims` giving the index of this value under each
    assignment; broadcastable against shape (sizes of dims)."""
    match v:
        case Var(name):
            size = scope[name][1]
            axis = dims.index(name)
            shape = [1] * len(dims)
            shape[axis] = size
            return np.arange(size, dtype=np.int64).reshape(shape)
        case Sole():
            return np.zeros((1,) * len(dims), dtype=np.int64)
        case Left(inner, _):
            assert isinstance(t, Sum)
            return _index_factor(inner, t.left, scope, dims)
        case Right(inner, _):
            assert isinstance(t, Sum)
            return type_size(t.left) + _index_factor(inner, t.right, scope, dims)
        case Pair(a, b):
            assert isinstance(t, Prod)
            ia = _index_factor(a, t.first, scope, dims)
            ib = _index_factor(b, t.second, scope, dims)
            return ia * type_size(t.second) + ib
    raise TypeError(v)


def _flatten_conj(g: Goal, out: list[Goal]) -> None:
    if isinstance(g, Conj):
        _flatten_conj(g.g1, out)
        _flatten_conj(g.g2, out)
    else:
        out.append(g)


def _eval_array(g: Goal, scope: dict[str, tuple[TypeExpr, int]],
                tables: dict[str, RelTable], spec: SemiringSpec) -> _Factor:
    order = tuple(scope)
    sizes = {name: size for name, (_, size) in scope.items()}

    match g:
        case Factor(lit):
            w = parse_weight_literal(lit, spec)
            return _Factor((), np.asarray(w, dtype=spec.dtype))
        case Unify(v1, v2, ty) | Disunify(v1, v2, ty):
            assert ty is not None, "goal must be type-checked"
            fv = [d for d in order if d in set(free_vars(v1)) | set(free_vars(v2))]
            dims = tuple(fv)
            i1 = _index_factor(v1, ty, scope, dims)
            i2 = _index_factor(v2, ty, scope, dims)
            hit = (i1 == i2) if isinstance(g, Unify) else (i1 != i2)
            shape = tuple(sizes[d] for d in dims)
            hit = np.broadcast_to(hit, shape)
            arr = np.where(hit, spec.one, spec.zero).astype(spec.dtype, copy=False)
            return _Factor(dims, arr)
        case Conj(a, b):
            return _combine(_eval_array(a, scope, tables, spec),
                            _eval_array(b, scope, tables, spec), spec.mul, order, sizes)
        case Disj(a, b):
            return _combine(_eval_array(a, scope, tables, spec),
                            _eval_array(b, scope, tables, spec), spec.add, order, sizes)
        case Call(rel, args, _):
            table = tables[rel]
            fv: list[str] = []
            for a in args:
                for d in free_vars(a):
                    if d not in fv:
                        fv.append(d)
            dims = tuple(d for d in order if d in fv)
            shape = tuple(sizes[d] for d in dims)
            indices = tuple(
                np.broadcast_to(
                    _index_factor(a, ty, scope, dims), shape)
                for a, (_, ty) in zip(args, table.params)
            )
            arr = table.cells[indices] if indices else \
                np.broadcast_to(table.cells, shape).copy()
            return _Factor(dims, np.asarray(arr))
        case Fresh():
            binders: list[tuple[str, TypeExpr, int]] = []
            body: Goal = g
            inner_scope = dict(scope)
            while isinstance(body, Fresh):
                assert body.var not in inner_scope, "shadowed binder survived parsing"
                n = type_size(body.ty)
                binders.append((body.var, body.ty, n))
                inner_scope[body.var] = (body.ty, n)
                body = body.body
            parts: list[Goal] = []
            _flatten_conj(body, parts)
            factors = [_eval_array(p, inner_scope, tables, spec) for p in parts]
            return _eliminate(factors, binders, dict(inner_scope), spec, tuple(scope))
    raise TypeError(g)


def _eliminate(factors: list[_Factor], binders: list[tuple[str, TypeExpr, int]],
               scope: dict[str, tuple[TypeExpr, int]], spec: SemiringSpec,
               outer_order: tuple[str, ...]) -> _Factor:
    """Sum the bound variables out of a product of factors, smallest
    intermediate first."""
    order = tuple(scope)
    sizes = {name: size for name, (_, size) in scope.items()}
    pending = {name: size for name, _, size in binders}

    while pending:
        best, best_cost = None, None
        for name in pending:
            group_dims: set[str] = set()
            for f in factors:
                if name in f.dims:
                    group_dims.update(f.dims)
            cost = 1
            for d in group_dims or {name}:
                cost *= sizes[d]
            if best_cost is None or cost < best_cost:
                best, best_cost = name, cost
        name = best
        size = pending.pop(name)
        group = [f for f in factors if name in f.dims]
        factors = [f for f in factors if name not in f.dims]
        if not group:
            # unused binder: the sum contributes |type| copies of one
            ones = np.full(size, spec.one, dtype=spec.dtype)
            factors.append(_Factor((), spec.add.reduce(ones)))
            continue
        acc = group[0]
        for f in group[1:]:
            acc = _combine(acc, f, spec.mul, order, sizes)
        axis = acc.dims.index(name)
        reduced = spec.sum(acc.arr, axis)
        factors.append(_Factor(tuple(d for d in acc.dims if d != name), reduced))

    if not factors:
        return _Factor((), np.asarray(spec.one, dtype=spec.dtype))
    acc = factors[0]
    for f in factors[1:]:
        acc = _combine(acc, f, spec.mul, order, sizes)
    assert all(d in outer_order for d in acc.dims)
    return acc


def eval_relation(rel: RelationDef, tables: dict[str, RelTable],
                  spec: SemiringSpec) -> RelTable:
    """Tabulate one relation's body over its full argument grid."""
    scope = {name: (ty, type_size(ty)) for name, ty in rel.params}
    f = _eval_array(rel.body, scope, tables, spec)
    dims = tuple(scope)
    sizes = {name: size for name, (_, size) in scope.items()}
    shape = tuple(sizes[d] for d in dims)
    cells = np.broadcast_to(_aligned(f, dims, sizes), shape).copy()
    return RelTable(rel.name, rel.params, cells)


# ---------------------------------------------------------------------------
# scalar goal evaluation

def eval_goal(g: Goal, tables: dict[str, RelTable], env: ValueEnv,
              spec: SemiringSpec) -> Weight:
    """Weight of one goal under one full variable assignment."""
    match g:
        case Conj(a, b):
            return spec.mul(eval_goal(a, tables, env, spec),
                            eval_goal(b, tables, env, spec))
        case Disj(a, b):
            return spec.add(eval_goal(a, tables, env, spec),
                            eval_goal(b, tables, env, spec))
        case Fresh(x, ty, body):
            acc = np.asarray(spec.zero, dtype=spec.dtype)
            for v in enumerate_type(ty):
                acc = spec.add(acc, eval_goal(body, tables, {**env, x: v}, spec))
            return acc
        case Unify(v1, v2, _):
            hit = eval_value(v1, env) == eval_value(v2, env)
            return spec.one if hit else spec.zero
        case Disunify(v1, v2, _):
            hit = eval_value(v1, env) != eval_value(v2, env)
            return spec.one if hit else spec.zero
        case Call(rel, args, _):
            table = tables[rel]
            idx = tuple(value_index(eval_value(a, env), ty)
                        for a, (_, ty) in zip(args, table.params))
            return table.cells[idx]
        case Factor(lit):
            return parse_weight_literal(lit, spec)
    raise TypeError(g)


# ---------------------------------------------------------------------------
# fixpoint

@dataclass
class FixpointResult:
    tables: dict[str, RelTable]
    converged: bool
    iterations: int


def fixpoint(program: Program, spec: SemiringSpec, epsilon: Optional[float] = None,
             max_iters: int = 10000,
             on_round: Optional[Callable] = None) -> FixpointResult:
    """Iterate all relations from all-zero tables until they stabilize.

    Each round evaluates every relation against the previous round's
    tables.  Convergence is exact equality for discrete semirings and an
    absolute tolerance for the real semiring (`epsilon` overrides the
    semiring default).  If `max_iters` rounds pass without stabilizing,
    the last tables are returned with ``converged=False``.
    """
    tol = spec.equality_tolerance if epsilon is None else epsilon
    tables = {rel.name: zero_table(rel, spec) for rel in program.relations}
    for it in range(1, max_iters + 1):
        new = {rel.name: eval_relation(rel, tables, spec) for rel in program.relations}
        if on_round is not None:
            on_round(it, tables, new)
        if tol == 0.0:
            done = all(np.array_equal(tables[n].cells, new[n].cells) for n in new)
        else:
            done = all(np.allclose(tables[n].cells, new[n].cells, rtol=0.0, atol=tol)
                       for n in new)
        tables = new
        if done:
            return FixpointResult(tables, True, it)
    return FixpointResult(tables, False, max_iters)
