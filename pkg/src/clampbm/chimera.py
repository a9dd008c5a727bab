"""Chimera topology, RBM embedding and RBM-to-QUBO conversion.

Qubits are numbered the way annealer vendors number them: cell ``(row,
col)`` holds ``2 * cell_size`` qubits, side ``u = 0`` (vertical) and
``u = 1`` (horizontal), index ``((row * cols + col) * 2 + u) * cell_size +
k``. Inside a cell every vertical qubit couples to every horizontal one
(a complete bipartite block); vertical qubits also couple to the same ``k``
in the cell below, horizontal qubits to the same ``k`` in the cell to the
right.

The embedding is the row/column scheme that makes an RBM a natural fit:
visible unit ``i`` is a horizontal chain along cell row ``i // cell_size``,
hidden unit ``j`` a vertical chain down cell column ``j // cell_size``, and
the two meet inside cell ``(i // cell_size, j // cell_size)``. Chains only
span the cells the RBM needs, so a 12 x 3 RBM uses a 3 x 1 corner of the
graph whatever its size.

All QUBOs are over ``{0, 1}`` variables; there is no spin conversion.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

import networkx as nx
import numpy as np

from clampbm.models import BitArray, CapacityError, FloatArray, InvalidInputError, RbmParameters

DEFAULT_ROWS = 16
DEFAULT_COLS = 16
DEFAULT_CELL_SIZE = 4

Edge = tuple[int, int]


@dataclass(frozen=True, eq=False)
class ChimeraGraph:
    rows: int
    cols: int
    cell_size: int
    graph: nx.Graph = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return 2 * self.rows * self.cols * self.cell_size

    @property
    def edges(self) -> set[Edge]:
        return {_edge(u, v) for u, v in self.graph.edges}

    def qubit(self, row: int, col: int, side: int, k: int) -> int:
        return ((row * self.cols + col) * 2 + side) * self.cell_size + k

    def coordinates(self, qubit: int) -> tuple[int, int, int, int]:
        """``(row, col, side, k)`` of a qubit index."""
        cell, rest = divmod(qubit, 2 * self.cell_size)
        side, k = divmod(rest, self.cell_size)
        row, col = divmod(cell, self.cols)
        return row, col, side, k

    def has_coupler(self, u: int, v: int) -> bool:
        return bool(self.graph.has_edge(u, v))


@dataclass(frozen=True)
class Embedding:
    """Chains for the logical variables ``v ++ h`` (hidden ``j`` is ``n_visible + j``).

    Each chain is an ordered path: consecutive qubits share a coupler, and
    those couplers carry the chain penalty. ``couplers`` names, for each
    logical edge ``(i, n_visible + j)``, the physical coupler that carries
    ``W[i, j]``.
    """

    n_visible: int
    n_hidden: int
    chains: dict[int, tuple[int, ...]]
    couplers: dict[Edge, Edge]
    chain_strength: float

    @property
    def n_logical(self) -> int:
        return self.n_visible + self.n_hidden

    def qubits(self) -> list[int]:
        return sorted(q for chain in self.chains.values() for q in chain)


@dataclass(frozen=True)
class QuboProblem:
    """``sum linear_i x_i + sum quadratic_ij x_i x_j + offset`` over binary ``x``."""

    linear: dict[int, float]
    quadratic: dict[Edge, float]
    offset: float = 0.0

    def variables(self) -> list[int]:
        names = set(self.linear)
        for u, v in self.quadratic:
            names.update((u, v))
        return sorted(names)

    def objective(self, assignment: dict[int, int]) -> float:
        total = self.offset
        for i, coefficient in self.linear.items():
            total += coefficient * assignment[i]
        for (i, j), coefficient in self.quadratic.items():
            total += coefficient * assignment[i] * assignment[j]
        return total

    def dense(self, order: list[int]) -> tuple[FloatArray, FloatArray]:
        """Linear vector and symmetric coupling matrix over ``order``."""
        position = {name: index for index, name in enumerate(order)}
        linear = np.zeros(len(order))
        couplings = np.zeros((len(order), len(order)))
        for i, coefficient in self.linear.items():
            linear[position[i]] += coefficient
        for (i, j), coefficient in self.quadratic.items():
            couplings[position[i], position[j]] += coefficient
            couplings[position[j], position[i]] += coefficient
        return linear, couplings

    def evaluate(self, order: list[int], states: BitArray) -> FloatArray:
        """Objective for each row of ``states`` (columns follow ``order``)."""
        linear, couplings = self.dense(order)
        x = np.atleast_2d(states).astype(np.float64)
        return np.asarray(
            x @ linear + 0.5 * np.einsum("ki,ij,kj->k", x, couplings, x) + self.offset,
            dtype=np.float64,
        )


def _edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def build_chimera(
    rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS, cell_size: int = DEFAULT_CELL_SIZE
) -> ChimeraGraph:
    if min(rows, cols, cell_size) < 1:
        raise InvalidInputError(
            f"chimera dimensions must be positive, got {rows}x{cols} cells of size {cell_size}"
        )
    shell = ChimeraGraph(rows, cols, cell_size, nx.Graph())
    graph = nx.Graph()
    graph.add_nodes_from(range(shell.n_qubits))
    graph.add_edges_from(_chimera_edges(shell))
    return ChimeraGraph(rows, cols, cell_size, graph)


def _chimera_edges(shell: ChimeraGraph) -> Iterator[Edge]:
    size = shell.cell_size
    for row in range(shell.rows):
        for col in range(shell.cols):
            for k in range(size):
                vertical = shell.qubit(row, col, 0, k)
                horizontal = shell.qubit(row, col, 1, k)
                for other in range(size):
                    yield _edge(vertical, shell.qubit(row, col, 1, other))
                if row + 1 < shell.rows:
                    yield _edge(vertical, shell.qubit(row + 1, col, 0, k))
                if col + 1 < shell.cols:
                    yield _edge(horizontal, shell.qubit(row, col + 1, 1, k))


def default_chain_strength(params: RbmParameters) -> float:
    """``2 * max(|a|, |b|, |W|) + 1``: beats any single logical term."""
    largest = max(
        float(np.abs(params.visible_bias).max(initial=0.0)),
        float(np.abs(params.hidden_bias).max(initial=0.0)),
        float(np.abs(params.weights).max(initial=0.0)),
    )
    return 2.0 * largest + 1.0


def embed_rbm(
    n_visible: int, n_hidden: int, graph: ChimeraGraph, chain_strength: float = 1.0
) -> Embedding:
    if n_visible < 1 or n_hidden < 1:
        raise InvalidInputError("an RBM needs at least one visible and one hidden unit")
    if not chain_strength > 0:
        raise InvalidInputError(f"chain strength must be positive, got {chain_strength}")
    size = graph.cell_size
    row_blocks = math.ceil(n_visible / size)
    col_blocks = math.ceil(n_hidden / size)
    if row_blocks > graph.rows:
        raise CapacityError(
            f"{n_visible} visible units need {row_blocks} cell rows of {size} qubits; "
            f"the chimera graph has {graph.rows}"
        )
    if col_blocks > graph.cols:
        raise CapacityError(
            f"{n_hidden} hidden units need {col_blocks} cell columns of {size} qubits; "
            f"the chimera graph has {graph.cols}"
        )

    chains: dict[int, tuple[int, ...]] = {}
    for i in range(n_visible):
        row, k = divmod(i, size)
        chains[i] = tuple(graph.qubit(row, col, 1, k) for col in range(col_blocks))
    for j in range(n_hidden):
        col, k = divmod(j, size)
        chains[n_visible + j] = tuple(graph.qubit(row, col, 0, k) for row in range(row_blocks))

    couplers: dict[Edge, Edge] = {}
    for i in range(n_visible):
        for j in range(n_hidden):
            horizontal = graph.qubit(i // size, j // size, 1, i % size)
            vertical = graph.qubit(i // size, j // size, 0, j % size)
            couplers[(i, n_visible + j)] = _edge(horizontal, vertical)

    embedding = Embedding(n_visible, n_hidden, chains, couplers, float(chain_strength))
    validate_embedding(embedding, graph)
    return embedding


def validate_embedding(embedding: Embedding, graph: ChimeraGraph) -> None:
    """Raise :class:`InvalidInputError` unless chains are disjoint, connected and cover edges."""
    owner: dict[int, int] = {}
    for node, chain in embedding.chains.items():
        if not chain:
            raise InvalidInputError(f"logical variable {node} has an empty chain")
        for qubit in chain:
            if qubit in owner:
                raise InvalidInputError(
                    f"qubit {qubit} is shared by variables {owner[qubit]} and {node}"
                )
            owner[qubit] = node
        if not nx.is_connected(graph.graph.subgraph(chain)):
            raise InvalidInputError(f"the chain of variable {node} is not connected")
        if not all(graph.has_coupler(u, v) for u, v in zip(chain, chain[1:], strict=False)):
            raise InvalidInputError(f"the chain of variable {node} is not an ordered path")
    for i in range(embedding.n_visible):
        for j in range(embedding.n_visible, embedding.n_logical):
            coupler = embedding.couplers.get((i, j))
            if coupler is None or not graph.has_coupler(*coupler):
                raise InvalidInputError(f"logical edge ({i}, {j}) has no physical coupler")
            if {owner[coupler[0]], owner[coupler[1]]} != {i, j}:
                raise InvalidInputError(f"coupler {coupler} does not join chains {i} and {j}")


def logical_qubo(params: RbmParameters) -> QuboProblem:
    """The RBM energy as a QUBO over ``v ++ h``; its objective is ``E(v, h)``."""
    n = params.n_visible
    linear = {i: -float(a) for i, a in enumerate(params.visible_bias)}
    linear.update({n + j: -float(b) for j, b in enumerate(params.hidden_bias)})
    quadratic = {
        (i, n + j): -float(params.weights[i, j])
        for i in range(n)
        for j in range(params.n_hidden)
    }
    return QuboProblem(linear, quadratic)


def rbm_to_qubo(params: RbmParameters, embedding: Embedding) -> QuboProblem:
    """The embedded (physical) QUBO.

    Linear terms are split evenly over a chain's qubits, each weight sits on
    its coupler, and every coupler inside a chain adds ``s * (x_p + x_q -
    2 x_p x_q)``, which is zero exactly when the two qubits agree. On any
    unbroken-chain state the objective therefore equals ``E(v, h)``.
    """
    if (params.n_visible, params.n_hidden) != (embedding.n_visible, embedding.n_hidden):
        raise InvalidInputError(
            f"embedding is for a {embedding.n_visible}x{embedding.n_hidden} RBM, "
            f"parameters are {params.n_visible}x{params.n_hidden}"
        )
    logical = logical_qubo(params)
    strength = embedding.chain_strength
    linear: dict[int, float] = {}
    quadratic: dict[Edge, float] = {}
    for node, chain in embedding.chains.items():
        share = logical.linear[node] / len(chain)
        for qubit in chain:
            linear[qubit] = linear.get(qubit, 0.0) + share
        for u, v in zip(chain, chain[1:], strict=False):
            linear[u] = linear.get(u, 0.0) + strength
            linear[v] = linear.get(v, 0.0) + strength
            key = _edge(u, v)
            quadratic[key] = quadratic.get(key, 0.0) - 2.0 * strength
    for logical_edge, coefficient in logical.quadratic.items():
        key = embedding.couplers[logical_edge]
        quadratic[key] = quadratic.get(key, 0.0) + coefficient
    return QuboProblem(linear, quadratic, logical.offset)


def unembed(
    embedding: Embedding, order: list[int], states: BitArray, rng: np.random.Generator
) -> tuple[BitArray, BitArray]:
    """Majority-vote each chain back to its logical bit; ties are a seeded coin flip."""
    position = {qubit: index for index, qubit in enumerate(order)}
    physical = np.atleast_2d(states)
    logical = np.zeros((physical.shape[0], embedding.n_logical), dtype=np.int8)
    for node in range(embedding.n_logical):
        columns = [position[q] for q in embedding.chains[node]]
        share = physical[:, columns].mean(axis=1)
        coin = rng.integers(0, 2, size=share.shape[0])
        logical[:, node] = np.where(share > 0.5, 1, np.where(share < 0.5, 0, coin))
    return logical[:, : embedding.n_visible], logical[:, embedding.n_visible :]


def graph_to_json(graph: ChimeraGraph) -> dict[str, Any]:
    return {
        "rows": graph.rows,
        "cols": graph.cols,
        "cell_size": graph.cell_size,
        "qubits": sorted(int(q) for q in graph.graph.nodes),
        "edges": [list(edge) for edge in sorted(graph.edges)],
    }


def embedding_to_json(embedding: Embedding) -> dict[str, Any]:
    def label(node: int) -> str:
        if node < embedding.n_visible:
            return f"v{node}"
        return f"h{node - embedding.n_visible}"

    return {
        "n_visible": embedding.n_visible,
        "n_hidden": embedding.n_hidden,
        "chain_strength": embedding.chain_strength,
        "chains": {label(node): list(chain) for node, chain in sorted(embedding.chains.items())},
        "couplers": [
            {"logical": [label(i), label(j)], "physical": list(physical)}
            for (i, j), physical in sorted(embedding.couplers.items())
        ],
    }
