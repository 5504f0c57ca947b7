"""Graph machinery and networked problem constructions.

Covers consensus, row- and column-partitioned linear equation solving, and
the balance-constraint projections used for dispatch problems.  Distributed
protocols must be componentwise sign-preserving so each agent's update reads
only neighbor states.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import flows, protocols
from .core import Array, Objective, quadratic_objective
from .errors import (
    DistributednessError,
    InfeasibilityError,
    ValidationError,
)
from .flows import FlowSpec
from .protocols import ProtocolLike

EIG_CUTOFF = 1e-10


def _lambda2(M: Array) -> float:
    """Smallest nonzero eigenvalue of a symmetric psd matrix."""
    w = np.linalg.eigvalsh(M)
    cutoff = EIG_CUTOFF * max(w[-1], 0.0)
    nonzero = w[w > cutoff]
    return float(nonzero[0]) if nonzero.size else 0.0


@dataclass(frozen=True)
class Graph:
    """Weighted undirected graph with its Laplacian."""

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("graph needs at least one node")
        for i, j, w in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n) or i == j:
                raise ValidationError(f"bad edge ({i}, {j})")
            if w <= 0:
                raise ValidationError("edge weights must be positive")

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        return Graph(n, tuple((int(i), int(j), float(w)) for i, j, w in edges))

    @property
    def laplacian(self) -> Array:
        L = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            L[i, i] += w
            L[j, j] += w
            L[i, j] -= w
            L[j, i] -= w
        return L

    @property
    def lambda2(self) -> float:
        """Algebraic connectivity: the second-smallest Laplacian eigenvalue."""
        if self.n == 1:
            return 0.0
        w = np.linalg.eigvalsh(self.laplacian)
        cutoff = EIG_CUTOFF * max(w[-1], 0.0)
        return float(w[1]) if w[1] > cutoff else 0.0

    @property
    def is_connected(self) -> bool:
        return self.n == 1 or self.lambda2 > 0.0

    def neighbor_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            out[i].append(j)
            out[j].append(i)
        return [sorted(set(nbrs)) for nbrs in out]


def cycle_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n, weight) for i in range(n)])


def complete_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(
        n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)]
    )


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, i + 1, weight) for i in range(n - 1)])


def graph_from_csv(path, n: int | None = None) -> Graph:
    """Read an edge list ``i,j,w`` (weight optional, default 1)."""
    edges = []
    max_node = -1
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            i, j = int(row[0]), int(row[1])
            w = float(row[2]) if len(row) > 2 else 1.0
            edges.append((i, j, w))
            max_node = max(max_node, i, j)
    return Graph.from_edges(n if n is not None else max_node + 1, edges)


@dataclass(frozen=True)
class PartitionedSystem:
    """Per-agent blocks of a linear system, partitioned by rows or columns."""

    blocks: tuple[tuple[Array, Array], ...]
    mode: str = "rows"
    delta: float = 1.0

    def __post_init__(self):
        if self.mode not in ("rows", "columns"):
            raise ValidationError("mode must be 'rows' or 'columns'")
        if self.delta <= 0:
            raise ValidationError("delta must be positive")
        if len(self.blocks) == 0:
            raise ValidationError("need at least one agent block")
        norm = tuple(
            (np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float)))
            for A, b in self.blocks
        )
        object.__setattr__(self, "blocks", norm)
        for A, b in self.blocks:
            if A.shape[0] != b.shape[0]:
                raise ValidationError("block row counts must match b entries")
        if self.mode == "rows":
            ncols = {A.shape[1] for A, _ in self.blocks}
            if len(ncols) != 1:
                raise ValidationError("row partition blocks must share the unknown dimension")
        else:
            nrows = {A.shape[0] for A, _ in self.blocks}
            if len(nrows) != 1:
                raise ValidationError("column partition blocks must share the equation count")

    @property
    def n_agents(self) -> int:
        return len(self.blocks)

    def stacked(self) -> tuple[Array, Array]:
        """The global system: vstack for rows mode, hstack/sum for columns."""
        if self.mode == "rows":
            A = np.vstack([A for A, _ in self.blocks])
            b = np.concatenate([b for _, b in self.blocks])
        else:
            A = np.hstack([A for A, _ in self.blocks])
            b = np.sum([b for _, b in self.blocks], axis=0)
        return A, b

    def is_consistent(self) -> bool:
        A, b = self.stacked()
        return np.linalg.matrix_rank(np.column_stack([A, b])) == np.linalg.matrix_rank(A)


def load_partitioned_system(block_paths, mode: str = "rows", delta: float = 1.0) -> PartitionedSystem:
    """Load agent blocks from pairs of CSV paths ``(A_csv, b_csv)``."""
    blocks = []
    for a_path, b_path in block_paths:
        A = np.loadtxt(a_path, delimiter=",", ndmin=2)
        b = np.loadtxt(b_path, delimiter=",", ndmin=1)
        blocks.append((A, b))
    return PartitionedSystem(tuple(blocks), mode=mode, delta=delta)


def consensus_objective(graph: Graph) -> Objective:
    """Quadratic consensus cost on the graph Laplacian.

    The minimizer set is the consensus line, the optimal value is zero, and
    the PL constant is the algebraic connectivity.
    """
    if not graph.is_connected:
        raise ValidationError("consensus needs a connected graph")
    return quadratic_objective(graph.laplacian)


def consensus_flow(graph: Graph, g: ProtocolLike) -> FlowSpec:
    """Distributed consensus protocol ``xdot = -g(Lx)``.

    ``g`` must be componentwise sign-preserving so agent i's update involves
    only its neighbors' states.
    """
    if not graph.is_connected:
        raise ValidationError("consensus needs a connected graph")
    if not protocols.is_componentwise(g):
        raise DistributednessError(
            "consensus protocol must be componentwise sign-preserving"
        )
    L = graph.laplacian

    def rhs(x, t):
        return -protocols.eval(g, L @ x)

    return FlowSpec("consensus", rhs, graph.n, info={"protocol": protocols.to_config(g)})


def _row_partition_matrices(sys: PartitionedSystem, graph: Graph):
    if sys.mode != "rows":
        raise ValidationError("expected a row-partitioned system")
    if sys.n_agents != graph.n:
        raise ValidationError("one block per graph node is required")
    n = sys.blocks[0][0].shape[1]
    A_hat = np.zeros((sum(A.shape[0] for A, _ in sys.blocks), graph.n * n))
    r = 0
    for i, (A_i, _) in enumerate(sys.blocks):
        A_hat[r : r + A_i.shape[0], i * n : (i + 1) * n] = A_i
        r += A_i.shape[0]
    b_hat = np.concatenate([b for _, b in sys.blocks])
    L_hat = np.kron(graph.laplacian, np.eye(n))
    return A_hat, b_hat, L_hat, n


def row_partition_objective(sys: PartitionedSystem, graph: Graph) -> Objective:
    """Stacked consensus-plus-residual cost for row-partitioned equations.

    Zero exactly on consensus states solving the full system; the PL constant
    is the smallest nonzero eigenvalue of the penalized stacked matrix.
    """
    if not graph.is_connected:
        raise ValidationError("row partition objective needs a connected graph")
    if not sys.is_consistent():
        raise InfeasibilityError("stacked system is inconsistent")
    A_hat, b_hat, L_hat, n = _row_partition_matrices(sys, graph)
    delta = sys.delta
    M = L_hat + delta * (A_hat.T @ A_hat)
    c = -delta * (A_hat.T @ b_hat)
    const = 0.5 * delta * float(b_hat @ b_hat)
    base = quadratic_objective(M, c)

    def f(x):
        return base.f(x) + const

    return Objective(
        dim=graph.n * n,
        f=f,
        grad=base.grad,
        hessian=base.hessian,
        f_star=0.0,
        pl_mu=base.pl_mu,
        minimizer_projection=base.minimizer_projection,
    )


def row_partition_flow(sys: PartitionedSystem, graph: Graph, g: ProtocolLike) -> FlowSpec:
    """Distributed flow on the row-partitioned objective.

    With a componentwise protocol, each agent's update reads its own residual
    and its neighbors' copies only.
    """
    if not protocols.is_componentwise(g):
        raise DistributednessError(
            "distributed equation solving needs a componentwise protocol"
        )
    obj = row_partition_objective(sys, graph)
    spec = flows.first_order_flow(obj, g)
    return FlowSpec("row_partition", spec.rhs, obj.dim, info=spec.info)


def column_partition_objective(sys: PartitionedSystem, graph: Graph) -> Objective:
    """Joint quadratic cost whose zeros encode the column-partitioned solution."""
    if sys.mode != "columns":
        raise ValidationError("expected a column-partitioned system")
    if sys.n_agents != graph.n:
        raise ValidationError("one block per graph node is required")
    m = sys.blocks[0][0].shape[0]
    N = graph.n
    sizes = [A.shape[1] for A, _ in sys.blocks]
    nx = sum(sizes)
    A_hat = np.zeros((N * m, nx))
    col = 0
    for i, (A_i, _) in enumerate(sys.blocks):
        A_hat[i * m : (i + 1) * m, col : col + A_i.shape[1]] = A_i
        col += A_i.shape[1]
    b_hat = np.concatenate([b for _, b in sys.blocks])
    L_hat = np.kron(graph.laplacian, np.eye(m))
    dim = nx + 2 * N * m

    def split(s):
        return s[:nx], s[nx : nx + N * m], s[nx + N * m :]

    def f(s):
        x, y, z = split(np.asarray(s, dtype=float))
        r1 = y + A_hat @ x - b_hat
        r2 = y + L_hat @ z
        return 0.5 * float(r1 @ r1) + 0.5 * float(r2 @ r2)

    def grad(s):
        x, y, z = split(np.asarray(s, dtype=float))
        r1 = y + A_hat @ x - b_hat
        r2 = y + L_hat @ z
        return np.concatenate([A_hat.T @ r1, r1 + r2, L_hat @ r2])

    M = np.zeros((dim, dim))
    M[:nx, :nx] = A_hat.T @ A_hat
    M[:nx, nx : nx + N * m] = A_hat.T
    M[nx : nx + N * m, :nx] = A_hat
    M[nx : nx + N * m, nx : nx + N * m] = 2.0 * np.eye(N * m)
    M[nx : nx + N * m, nx + N * m :] = L_hat
    M[nx + N * m :, nx : nx + N * m] = L_hat
    M[nx + N * m :, nx + N * m :] = L_hat @ L_hat

    return Objective(
        dim=dim,
        f=f,
        grad=grad,
        hessian=lambda s: M,
        f_star=0.0,
        pl_mu=_lambda2(M),
    )


def column_partition_flow(
    sys: PartitionedSystem,
    graph: Graph,
    g_x: ProtocolLike,
    g_y: ProtocolLike,
    g_z: ProtocolLike,
) -> FlowSpec:
    """Distributed flow for column-partitioned equations.

    The three state groups follow the gradient blocks of the joint cost; the
    auxiliary ``z`` update needs two neighbor exchanges per evaluation.
    """
    for g in (g_x, g_y, g_z):
        if not protocols.is_componentwise(g):
            raise DistributednessError(
                "column-partitioned solving needs componentwise protocols"
            )
    if not graph.is_connected:
        raise ValidationError("column partition flow needs a connected graph")
    obj = column_partition_objective(sys, graph)
    m = sys.blocks[0][0].shape[0]
    N = graph.n
    nx = obj.dim - 2 * N * m

    def rhs(s, t):
        grad_full = obj.grad(s)
        gx_val = protocols.eval(g_x, grad_full[:nx])
        gy_val = protocols.eval(g_y, grad_full[nx : nx + N * m])
        gz_val = protocols.eval(g_z, grad_full[nx + N * m :])
        return -np.concatenate([gx_val, gy_val, gz_val])

    return FlowSpec("column_partition", rhs, obj.dim, info={"nx": nx, "m": m, "N": N})


@dataclass(frozen=True)
class DispatchProjection:
    """A validated projection matrix for the scalar balance constraint.

    ``lambda2`` is the smallest nonzero eigenvalue of the (symmetric) matrix
    itself, ``lambda2_gram`` the one of its Gram matrix entering the settling
    bound, and ``spectral_norm`` its largest singular value.
    """

    matrix: Array
    lambda2: float | None
    lambda2_gram: float
    spectral_norm: float


def dispatch_projection(P: Array) -> DispatchProjection:
    """Validate a projection for the balance constraint ``sum(x) = sum(d)``.

    Rows and columns must sum to zero so the flow preserves the total and
    moves only within the balance hyperplane.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("P must be square")
    scale = max(np.linalg.norm(P), 1e-300)
    ones = np.ones(P.shape[0])
    if np.linalg.norm(P @ ones) > 1e-10 * scale:
        raise ValidationError("P rows must sum to zero")
    if np.linalg.norm(ones @ P) > 1e-10 * scale:
        raise ValidationError("P columns must sum to zero")
    symmetric = np.linalg.norm(P - P.T) <= 1e-12 * scale
    lam2 = _lambda2(P) if symmetric else None
    return DispatchProjection(
        matrix=P,
        lambda2=lam2,
        lambda2_gram=_lambda2(P.T @ P),
        spectral_norm=float(np.linalg.norm(P, 2)),
    )
