"""Gang/vector reduction model, serial oracle, and the scalar race rule.

Iterations are block-distributed over gangs (remainder to the last gang);
each gang folds its block sequentially into a private accumulator, and
gang partials combine in gang-index order.  Deterministic mode discards
the partials and recomputes in canonical serial order, so the result is
bitwise independent of the gang/vector configuration.

For floating point inputs the nondeterministic path additionally records
a stride-halving tree combine of the gang partials, the grouping a real
device reduction would typically use; comparing it against the serial
value is what demonstrates run-to-run divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DimOutOfRange

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

OPS = ("sum", "product", "max", "min")


@dataclass
class ExecConfig:
    num_gangs: int
    vector_length: int
    deterministic: bool = False

    def __post_init__(self):
        if self.num_gangs < 1 or self.vector_length < 1:
            raise ValueError("num_gangs and vector_length must be >= 1")


@dataclass
class ReductionSpec:
    op: str  # sum | product | max | min
    kind: str  # int | real
    reduce_dim: int | None = None  # None => scalar target


@dataclass
class ReductionResult:
    value: object  # scalar or list
    oracle: object
    partials: list
    tree_value: object  # alternate grouping (nondeterministic mode only)
    bitwise_equal: bool
    deterministic: bool


def identity(op: str, kind: str):
    if op == "sum":
        return 0 if kind == "int" else 0.0
    if op == "product":
        return 1 if kind == "int" else 1.0
    if op == "max":
        return INT64_MIN if kind == "int" else -math.inf
    if op == "min":
        return INT64_MAX if kind == "int" else math.inf
    raise ValueError(f"unknown reduction op {op!r}")


def combine(op: str, a, b):
    if op == "sum":
        return a + b
    if op == "product":
        return a * b
    if op == "max":
        return a if a >= b else b
    return a if a <= b else b


def fold(op: str, kind: str, values) -> object:
    acc = identity(op, kind)
    for v in values:
        acc = combine(op, acc, v)
    return acc


def partition(n: int, gangs: int) -> list[range]:
    """Contiguous index blocks, one per gang; the remainder goes to the
    last gang.  Concatenating the blocks reproduces range(n)."""
    per = n // gangs
    blocks = []
    start = 0
    for g in range(gangs):
        end = start + per if g < gangs - 1 else n
        blocks.append(range(start, end))
        start = end
    return blocks


def _tree_combine(op: str, kind: str, partials: list):
    """Stride-halving butterfly over gang partials."""
    vals = list(partials)
    n = len(vals)
    if n == 0:
        return identity(op, kind)
    while n > 1:
        half = (n + 1) // 2
        for i in range(half):
            j = i + half
            if j < n:
                vals[i] = combine(op, vals[i], vals[j])
        n = half
    return vals[0]


def serial_oracle(spec: ReductionSpec, values) -> object:
    """Strict left-to-right, index-ascending application of the operator.

    Empty input yields the identity.  For an array target, elementwise
    over the kept dimension.
    """
    if spec.reduce_dim is None:
        return fold(spec.op, spec.kind, values)
    rows, cols = _matrix_dims(values)
    if spec.reduce_dim == 0:
        out = [identity(spec.op, spec.kind)] * cols
        for i in range(rows):
            for j in range(cols):
                out[j] = combine(spec.op, out[j], values[i][j])
        return out
    out = [identity(spec.op, spec.kind)] * rows
    for i in range(rows):
        for j in range(cols):
            out[i] = combine(spec.op, out[i], values[i][j])
    return out


def _matrix_dims(matrix) -> tuple[int, int]:
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    for row in matrix:
        if len(row) != cols:
            raise ValueError("matrix must be rectangular")
    return rows, cols


def run_scalar_reduction(config: ExecConfig, spec: ReductionSpec,
                         values) -> ReductionResult:
    values = list(values)
    oracle = serial_oracle(spec, values)
    blocks = partition(len(values), config.num_gangs)
    partials = [fold(spec.op, spec.kind, (values[i] for i in block))
                for block in blocks]
    if config.deterministic:
        value = oracle
        tree = oracle
    else:
        value = fold(spec.op, spec.kind, partials)
        tree = _tree_combine(spec.op, spec.kind, partials)
    return ReductionResult(value, oracle, partials, tree,
                           bitwise_equal=_biteq(value, oracle),
                           deterministic=config.deterministic)


def run_array_reduction(config: ExecConfig, spec: ReductionSpec,
                        matrix) -> ReductionResult:
    if spec.reduce_dim not in (0, 1):
        raise DimOutOfRange(f"reduce_dim {spec.reduce_dim} not in (0, 1)")
    rows, cols = _matrix_dims(matrix)
    oracle = serial_oracle(spec, matrix)
    keep = cols if spec.reduce_dim == 0 else rows
    extent = rows if spec.reduce_dim == 0 else cols
    blocks = partition(extent, config.num_gangs)
    partials = []
    for block in blocks:
        acc = [identity(spec.op, spec.kind)] * keep
        for i in block:
            for k in range(keep):
                v = matrix[i][k] if spec.reduce_dim == 0 else matrix[k][i]
                acc[k] = combine(spec.op, acc[k], v)
        partials.append(acc)
    if config.deterministic:
        value = list(oracle)
        tree = list(oracle)
    else:
        value = [fold(spec.op, spec.kind, (p[k] for p in partials))
                 for k in range(keep)]
        tree = [_tree_combine(spec.op, spec.kind, [p[k] for p in partials])
                for k in range(keep)]
    return ReductionResult(value, oracle, partials, tree,
                           bitwise_equal=_biteq(value, oracle),
                           deterministic=config.deterministic)


def _biteq(a, b) -> bool:
    if isinstance(a, list):
        return len(a) == len(b) and all(_biteq(x, y) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return math.copysign(1.0, a) == math.copysign(1.0, b) and a == b \
            or (math.isnan(a) and math.isnan(b))
    return a == b


# --- race detection ------------------------------------------------------


@dataclass
class LoopLevel:
    parallelism: str  # gang | vector | seq
    var: str
    extent: int
    private: frozenset = frozenset()
    reduction: frozenset = frozenset()


@dataclass
class BodyAccess:
    mode: str  # read | write
    var: str
    indices: tuple = ()


@dataclass
class LoopSpec:
    levels: list[LoopLevel]
    accesses: list[BodyAccess]


@dataclass
class Finding:
    variable: str
    kind: str  # write-write | read-write
    level: str  # vector | gang
    explanation: str


@dataclass
class ConflictReport:
    findings: list[Finding] = field(default_factory=list)


def detect_races(loop: LoopSpec) -> ConflictReport:
    """Unprivatized-scalar race rule.

    A scalar with no privatization (or only firstprivate treatment, the
    default for unlisted scalars) has one copy per gang; a write to it
    from inside a vector loop with two or more lanes is a write-write
    conflict across the lanes of a gang.  ``private`` at the vector level
    and reduction variables are per-lane and safe.  Array writes whose
    index list contains the vector loop variable hit distinct elements
    and are safe.
    """
    report = ConflictReport()
    vector = next((lv for lv in loop.levels if lv.parallelism == "vector"),
                  None)
    if vector is None or vector.extent < 2:
        return report
    reductions = set()
    for lv in loop.levels:
        reductions.update(lv.reduction)
    flagged = set()
    for acc in loop.accesses:
        if acc.mode != "write" or acc.var in flagged:
            continue
        if acc.var in reductions or acc.var in vector.private:
            continue
        if acc.indices:
            if vector.var in acc.indices:
                continue
            explanation = (f"all {vector.extent} vector lanes write "
                           f"{acc.var}[{', '.join(acc.indices)}]; the index "
                           f"list does not vary with lane variable "
                           f"{vector.var!r}")
        else:
            explanation = (f"{acc.var!r} is shared by the lanes of each gang "
                           f"(unlisted scalars act firstprivate per gang) and "
                           f"every lane writes it")
        flagged.add(acc.var)
        report.findings.append(
            Finding(acc.var, "write-write", "vector", explanation))
    return report
