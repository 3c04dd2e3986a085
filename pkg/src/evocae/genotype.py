"""Grid-encoded genotypes for encoder architectures and their genetic operators.

An encoder is encoded on a ``rows x cols`` grid of candidate convolution
nodes. Each node carries two integer genes: a type (index into a
:class:`NodeTypeTable`, fixing filter count, kernel size and skip flag) and a
connection (the id of the node feeding it, where id 0 is the image input).
One extra output gene stores only a connection. Decoding walks backward from
the output gene; only the nodes on that single chain are expressed, so most
of the grid is neutral material that mutation can rewrite without changing
the decoded network.

Node ids are assigned column-major: node id = (col - 1) * rows + row, both
1-based. A node in column ``n`` may connect to the input node when
``n <= level_back``, or to any node in columns ``n - level_back .. n - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, SearchError

GENOTYPE_FORMAT_VERSION = 1

#: Node id of the image input.
INPUT_NODE = 0

#: Retry cap for mutate-until-changed loops.
DEFAULT_MUTATION_ATTEMPTS = 10_000


@dataclass(frozen=True)
class NodeType:
    """One layer recipe: filter count, square kernel size, skip flag."""

    filters: int
    kernel: int
    skip: bool


@dataclass(frozen=True)
class NodeTypeTable:
    """All layer recipes available to the grid, addressed by integer type id.

    Entries are the full cartesian product of the filter set, the kernel set
    and the skip flag, ordered filters-major, kernels-middle, skip-minor
    (no-skip before skip).
    """

    filters: tuple[int, ...]
    kernels: tuple[int, ...]
    entries: tuple[NodeType, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, type_id: int) -> NodeType:
        return self.entries[type_id]


def build_type_table(filters: Iterable[int], kernels: Iterable[int]) -> NodeTypeTable:
    """Build the type table from a filter set and a kernel set.

    Raises ConfigError for empty sets, duplicates, non-positive filter
    counts, or even kernel sizes (odd kernels are required for symmetric
    zero padding).
    """
    filters = tuple(int(f) for f in filters)
    kernels = tuple(int(k) for k in kernels)
    if not filters or not kernels:
        raise ConfigError("filter and kernel sets must be non-empty")
    if len(set(filters)) != len(filters) or len(set(kernels)) != len(kernels):
        raise ConfigError("filter and kernel sets must not contain duplicates")
    if any(f < 1 for f in filters):
        raise ConfigError(f"filter counts must be positive: {filters}")
    for k in kernels:
        if k < 1 or k % 2 == 0:
            raise ConfigError(f"kernel sizes must be odd and positive: got {k}")
    entries = tuple(
        NodeType(f, k, skip)
        for f in filters
        for k in kernels
        for skip in (False, True)
    )
    return NodeTypeTable(filters=filters, kernels=kernels, entries=entries)


@dataclass(frozen=True)
class NodeGene:
    type_id: int
    connection: int


@dataclass(frozen=True)
class EncoderSpec:
    """Decoded active path, ordered from the input side to the bottleneck.

    ``node_ids`` records which grid nodes expressed each layer; it is
    excluded from equality because two genotypes routed through different
    cells can express the same architecture.
    """

    layers: tuple[NodeType, ...]
    node_ids: tuple[int, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def functioning(self) -> frozenset[int]:
        return frozenset(self.node_ids)


@dataclass(frozen=True)
class Genotype:
    """Immutable gene string for a ``rows x cols`` grid plus the output gene."""

    rows: int
    cols: int
    level_back: int
    table: NodeTypeTable
    genes: tuple[NodeGene, ...]
    output_connection: int

    @property
    def node_count(self) -> int:
        return self.rows * self.cols

    def node_column(self, node_id: int) -> int:
        return (node_id - 1) // self.rows + 1

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1 or self.level_back < 1:
            raise ConfigError(
                f"grid dimensions must be >= 1: rows={self.rows} cols={self.cols} "
                f"level_back={self.level_back}"
            )
        if len(self.genes) != self.node_count:
            raise ConfigError(
                f"expected {self.node_count} genes, got {len(self.genes)}"
            )
        for node_id, gene in enumerate(self.genes, start=1):
            if not 0 <= gene.type_id < len(self.table):
                raise ConfigError(f"node {node_id}: type id {gene.type_id} out of range")
            col = self.node_column(node_id)
            if gene.connection not in connection_domain(col, self.rows, self.level_back):
                raise ConfigError(
                    f"node {node_id} (column {col}): connection {gene.connection} "
                    f"violates the level-back constraint"
                )
        if not 1 <= self.output_connection <= self.node_count:
            raise ConfigError(
                f"output connection {self.output_connection} outside [1, {self.node_count}]"
            )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": GENOTYPE_FORMAT_VERSION,
            "rows": self.rows,
            "cols": self.cols,
            "level_back": self.level_back,
            "filters": list(self.table.filters),
            "kernels": list(self.table.kernels),
            "genes": [[g.type_id, g.connection] for g in self.genes],
            "output_connection": self.output_connection,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Genotype":
        try:
            version = data["version"]
            if version != GENOTYPE_FORMAT_VERSION:
                raise ConfigError(f"unsupported genotype format version {version}")
            table = build_type_table(data["filters"], data["kernels"])
            g = cls(
                rows=int(data["rows"]),
                cols=int(data["cols"]),
                level_back=int(data["level_back"]),
                table=table,
                genes=tuple(NodeGene(int(t), int(c)) for t, c in data["genes"]),
                output_connection=int(data["output_connection"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed genotype document: {exc}") from exc
        g.validate()
        return g

    @classmethod
    def from_text(cls, text: str) -> "Genotype":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"genotype file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def connection_domain(col: int, rows: int, level_back: int) -> list[int]:
    """Valid connection targets for a node in 1-based grid column ``col``."""
    domain = []
    if col <= level_back:
        domain.append(INPUT_NODE)
    lo = max(1, col - level_back)
    for c in range(lo, col):
        base = (c - 1) * rows
        domain.extend(range(base + 1, base + rows + 1))
    return domain


def output_domain(rows: int, cols: int) -> range:
    """Valid connection targets for the output gene: any grid node."""
    return range(1, rows * cols + 1)


def random_genotype(
    rows: int, cols: int, level_back: int, table: NodeTypeTable, rng: np.random.Generator
) -> Genotype:
    """Uniformly random valid genotype."""
    if rows < 1 or cols < 1 or level_back < 1:
        raise ConfigError(
            f"grid dimensions must be >= 1: rows={rows} cols={cols} level_back={level_back}"
        )
    genes = []
    for node_id in range(1, rows * cols + 1):
        col = (node_id - 1) // rows + 1
        domain = connection_domain(col, rows, level_back)
        genes.append(
            NodeGene(
                type_id=int(rng.integers(len(table))),
                connection=domain[int(rng.integers(len(domain)))],
            )
        )
    out_domain = output_domain(rows, cols)
    output = out_domain[int(rng.integers(len(out_domain)))]
    return Genotype(rows, cols, level_back, table, tuple(genes), output)


def minimal_genotype(
    rows: int, cols: int, level_back: int, table: NodeTypeTable, rng: np.random.Generator
) -> Genotype:
    """Initial parent: random neutral material, active path of exactly one node.

    Node 1 (column 1, row 1) is forced to the first table entry and wired to
    the input; the output gene points straight at it, so the decoded encoder
    always has length 1.
    """
    g = random_genotype(rows, cols, level_back, table, rng)
    genes = list(g.genes)
    genes[0] = NodeGene(type_id=0, connection=INPUT_NODE)
    return Genotype(rows, cols, level_back, table, tuple(genes), output_connection=1)


def decode(genotype: Genotype, table: NodeTypeTable | None = None) -> EncoderSpec:
    """Walk back from the output gene to the input node and return the path.

    Terminates in at most ``cols`` steps: every connection points to a
    strictly earlier column.
    """
    if table is None:
        table = genotype.table
    path = []
    node = genotype.output_connection
    while node != INPUT_NODE:
        path.append(node)
        node = genotype.genes[node - 1].connection
    path.reverse()
    layers = tuple(table[genotype.genes[n - 1].type_id] for n in path)
    return EncoderSpec(layers=layers, node_ids=tuple(path))


def point_mutation(
    genotype: Genotype, rate: float, rng: np.random.Generator
) -> Genotype:
    """Re-sample each gene field independently with probability ``rate``.

    Re-sampling draws uniformly from the field's valid value set and may
    return the current value. The input genotype is never modified.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"mutation rate must be in [0, 1]: {rate}")
    table_size = len(genotype.table)
    genes = []
    for node_id, gene in enumerate(genotype.genes, start=1):
        type_id = gene.type_id
        connection = gene.connection
        if rng.random() < rate:
            type_id = int(rng.integers(table_size))
        if rng.random() < rate:
            col = genotype.node_column(node_id)
            domain = connection_domain(col, genotype.rows, genotype.level_back)
            connection = domain[int(rng.integers(len(domain)))]
        genes.append(NodeGene(type_id, connection))
    output = genotype.output_connection
    if rng.random() < rate:
        out_domain = output_domain(genotype.rows, genotype.cols)
        output = out_domain[int(rng.integers(len(out_domain)))]
    return Genotype(
        genotype.rows,
        genotype.cols,
        genotype.level_back,
        genotype.table,
        tuple(genes),
        output,
    )


def mutate_child(
    parent: Genotype,
    rate: float,
    rng: np.random.Generator,
    validity: Callable[[EncoderSpec], bool] = lambda spec: True,
    max_attempts: int = DEFAULT_MUTATION_ATTEMPTS,
) -> Genotype:
    """Mutate until the decoded architecture changes and passes ``validity``.

    Each attempt restarts from the parent. Raises SearchError when the
    attempt cap is exceeded, which signals a degenerate configuration
    (e.g. rate 0, or a validity predicate that rejects everything).
    """
    parent_spec = decode(parent)
    for _ in range(max_attempts):
        child = point_mutation(parent, rate, rng)
        child_spec = decode(child)
        if child_spec != parent_spec and validity(child_spec):
            return child
    raise SearchError(
        f"no acceptable child after {max_attempts} mutation attempts "
        f"(rate={rate}); check the mutation rate and validity rule"
    )


def neutral_modify(
    parent: Genotype,
    rate: float,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MUTATION_ATTEMPTS,
) -> tuple[Genotype, bool]:
    """Re-sample fields of non-functioning nodes only; the phenotype is kept.

    Returns ``(genotype, modified)``. Retries until at least one field value
    actually changed. ``modified`` is False (and the parent is returned
    unchanged) when every node is functioning, or when ``rate`` is 0 so no
    change is possible.
    """
    functioning = decode(parent).functioning
    candidates = [n for n in range(1, parent.node_count + 1) if n not in functioning]
    if not candidates or rate <= 0.0:
        return parent, False
    table_size = len(parent.table)
    for _ in range(max_attempts):
        genes = list(parent.genes)
        changed = False
        for node_id in candidates:
            gene = genes[node_id - 1]
            type_id = gene.type_id
            connection = gene.connection
            if rng.random() < rate:
                type_id = int(rng.integers(table_size))
            if rng.random() < rate:
                col = parent.node_column(node_id)
                domain = connection_domain(col, parent.rows, parent.level_back)
                connection = domain[int(rng.integers(len(domain)))]
            if type_id != gene.type_id or connection != gene.connection:
                changed = True
                genes[node_id - 1] = NodeGene(type_id, connection)
        if changed:
            return (
                Genotype(
                    parent.rows,
                    parent.cols,
                    parent.level_back,
                    parent.table,
                    tuple(genes),
                    parent.output_connection,
                ),
                True,
            )
    raise SearchError(
        f"neutral modification failed to change any gene after {max_attempts} attempts"
    )
