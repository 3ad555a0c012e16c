"""
STGFormer Pose Lifter - Skeleton Graph
Joint topology, hop distances, normalized and exact-hop adjacency matrices,
and the structural bias index tables used by graph attention.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

import constants as C
from algorithms import bfs, hop_distances
from errors import GraphError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class SkeletonGraph:
    """
    Undirected joint graph with binary edges.

    Attributes:
        num_joints (int): Number of joints N
        edges (frozenset): Unordered joint pairs stored as (low, high)
        neighbors (tuple): ``neighbors[i]`` = sorted joints sharing a bone with i
        hop_dist (np.ndarray): Shortest-path hop counts [N×N], -1 if disconnected
    """

    def __init__(self, num_joints: int, edges: Iterable[Tuple[int, int]]):
        """
        Validate the edge list and fill the hop-distance matrix by BFS.

        Args:
            num_joints: Number of joints
            edges: Joint index pairs

        Raises:
            GraphError: Index out of range, self-loop or duplicate edge
        """
        if num_joints < 1:
            raise GraphError(f"a skeleton needs at least one joint, got {num_joints}")
        self.num_joints = num_joints

        seen = set()
        for i, j in edges:
            if not (0 <= i < num_joints and 0 <= j < num_joints):
                raise GraphError(f"edge ({i}, {j}) has a joint outside [0, {num_joints})")
            if i == j:
                raise GraphError(f"self-loop at joint {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        self.edges = frozenset(seen)

        adjacency: List[List[int]] = [[] for _ in range(num_joints)]
        for i, j in sorted(self.edges):
            adjacency[i].append(j)
            adjacency[j].append(i)
        self.neighbors = tuple(tuple(sorted(nbrs)) for nbrs in adjacency)
        self.hop_dist = _frozen(hop_distances(self.neighbors))

    # ========================================================================
    # MATRICES
    # ========================================================================

    def adjacency(self) -> np.ndarray:
        """Binary adjacency A [N×N], no self-loops."""
        a = np.zeros((self.num_joints, self.num_joints))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def parents(self, root: int = 0) -> List[int]:
        """
        BFS spanning-tree parent of every joint reachable from ``root``.

        Args:
            root: Tree root

        Returns:
            List with -1 for the root and for unreachable joints
        """
        parent = [-1] * self.num_joints
        for _, joint, depth in bfs(self.neighbors, root):
            if depth == 0:
                continue
            parent[joint] = next(
                nbr for nbr in self.neighbors[joint] if self.hop_dist[root, nbr] == depth - 1
            )
        return parent

    def bfs_order(self, root: int = 0) -> List[int]:
        """Joints reachable from ``root`` in breadth-first order."""
        return [joint for _, joint, _ in bfs(self.neighbors, root)]

    def __repr__(self) -> str:
        return f"SkeletonGraph(joints={self.num_joints}, edges={len(self.edges)})"


@dataclass(frozen=True)
class AdjacencySet:
    """
    Normalized base adjacency and its exact-hop decomposition.

    Attributes:
        base: Ã = D̂^(-1/2)(A+I)D̂^(-1/2)
        per_hop: ``per_hop[r-1]`` is the normalized exact-hop-r adjacency
    """
    base: np.ndarray
    per_hop: Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class BiasIndexTables:
    """
    Integer index tables into the learnable bias vectors.

    Attributes:
        spatial_index: [N×N], values in 0..D_s+1 (D_s+1 = unreachable)
        temporal_index: [T×T], values in 0..2·D_t (D_t = same frame)
        spatial_clip: D_s
        temporal_clip: D_t
    """
    spatial_index: np.ndarray
    temporal_index: np.ndarray
    spatial_clip: int
    temporal_clip: int

    @property
    def num_spatial_buckets(self) -> int:
        return self.spatial_clip + 2

    @property
    def num_temporal_buckets(self) -> int:
        return 2 * self.temporal_clip + 1


# ============================================================================
# CONSTRUCTION
# ============================================================================

def build_skeleton(edge_list: Sequence[Tuple[int, int]], n: int) -> SkeletonGraph:
    """Build a skeleton from an edge list, rejecting invalid topologies."""
    return SkeletonGraph(n, edge_list)


def chain_skeleton(n: int) -> SkeletonGraph:
    """Path graph 0–1–…–(n-1)."""
    return SkeletonGraph(n, [(i, i + 1) for i in range(n - 1)])


def permute_skeleton(g: SkeletonGraph, perm: Sequence[int]) -> SkeletonGraph:
    """
    Relabel joints so that old joint i becomes joint ``perm[i]``.

    Raises:
        GraphError: If ``perm`` is not a permutation of range(N)
    """
    if sorted(perm) != list(range(g.num_joints)):
        raise GraphError("relabeling must be a permutation of the joint indices")
    return SkeletonGraph(g.num_joints, [(perm[i], perm[j]) for i, j in sorted(g.edges)])


def parse_topology(text: str, source: str = "<text>") -> SkeletonGraph:
    """
    Parse the topology format: line 1 ``N``, then one ``i j`` edge per line.

    Raises:
        GraphError: Malformed header or edge line
    """
    lines = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise GraphError(f"{source}: empty topology file")
    try:
        n = int(lines[0])
    except ValueError:
        raise GraphError(f"{source}: first line must be the joint count, got '{lines[0]}'")

    edges = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{source}: expected 'i j', got '{line}'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphError(f"{source}: non-integer joint index in '{line}'")
    return SkeletonGraph(n, edges)


def load_topology(name: Union[str, Path], num_joints: Optional[int] = None) -> SkeletonGraph:
    """
    Resolve a built-in topology id, ``chain``, or a topology file path.

    Args:
        name: 'h36m17', 'mpi13', 'chain' or a path
        num_joints: Joint count for 'chain'; checked against the file otherwise

    Returns:
        The skeleton

    Raises:
        GraphError: Unknown id, unreadable file, or joint-count mismatch
    """
    if str(name) == "chain":
        if num_joints is None:
            raise GraphError("the 'chain' topology needs an explicit joint count")
        return chain_skeleton(num_joints)

    path = C.SKELETONS.get(str(name), Path(name))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read topology '{name}': {exc}")
    graph = parse_topology(text, str(path))
    if num_joints is not None and graph.num_joints != num_joints:
        raise GraphError(
            f"topology '{name}' has {graph.num_joints} joints but {num_joints} were requested"
        )
    logger.debug("loaded topology %s: %r", name, graph)
    return graph


# ============================================================================
# ADJACENCY
# ============================================================================

def _symmetric_normalize(indicator: np.ndarray) -> np.ndarray:
    """D^(-1/2) B D^(-1/2) with rows of zero degree left at zero."""
    degree = indicator.sum(axis=1)
    inv_sqrt = np.zeros_like(degree)
    np.divide(1.0, np.sqrt(degree), out=inv_sqrt, where=degree > 0)
    return inv_sqrt[:, None] * indicator * inv_sqrt[None, :]


def normalized_adjacency(g: SkeletonGraph) -> np.ndarray:
    """Ã = D̂^(-1/2)(A+I)D̂^(-1/2) where D̂ is the degree matrix of A+I."""
    return _frozen(_symmetric_normalize(g.adjacency() + np.eye(g.num_joints)))


def exact_hop_adjacency(g: SkeletonGraph, h: int) -> np.ndarray:
    """
    Normalized indicator of joint pairs exactly ``h`` hops apart.

    Self-loops are added only for h=1; a ring with no pairs yields the zero
    matrix.

    Raises:
        GraphError: If h < 1
    """
    if h < 1:
        raise GraphError(f"hop index must be >= 1, got {h}")
    indicator = (g.hop_dist == h).astype(np.float64)
    if h == 1:
        indicator += np.eye(g.num_joints)
    return _frozen(_symmetric_normalize(indicator))


def temporal_hop_adjacency(t_frames: int, k: int) -> np.ndarray:
    """Exact-hop adjacency of the per-joint frame chain 0–1–…–(T-1)."""
    return exact_hop_adjacency(chain_skeleton(t_frames), k)


def adjacency_set(g: SkeletonGraph, hops: int) -> AdjacencySet:
    """Base adjacency plus exact-hop rings 1..hops of a skeleton."""
    return AdjacencySet(
        base=normalized_adjacency(g),
        per_hop=tuple(exact_hop_adjacency(g, h) for h in range(1, hops + 1)),
    )


def temporal_adjacency_set(t_frames: int, hops: int) -> AdjacencySet:
    """Base adjacency plus exact-hop rings 1..hops of the frame chain."""
    return adjacency_set(chain_skeleton(t_frames), hops)


# ============================================================================
# STRUCTURAL BIAS INDICES
# ============================================================================

def bias_index_tables(g: SkeletonGraph, t_frames: int, d_s: int, d_t: int) -> BiasIndexTables:
    """
    Index functions of the spatial and temporal attention biases.

    spatial_index[i][j] = min(hop_dist, D_s), or D_s+1 when unreachable;
    temporal_index[t1][t2] = clamp(t2 - t1, -D_t, D_t) + D_t.

    Raises:
        GraphError: If a clip radius is below 1
    """
    if d_s < 1 or d_t < 1:
        raise GraphError(f"clip radii must be >= 1, got D_s={d_s}, D_t={d_t}")
    hop = g.hop_dist
    spatial = np.where(hop < 0, d_s + 1, np.minimum(hop, d_s))

    frames = np.arange(t_frames)
    offset = frames[None, :] - frames[:, None]
    temporal = np.clip(offset, -d_t, d_t) + d_t

    return BiasIndexTables(
        spatial_index=_frozen(spatial.astype(np.int64)),
        temporal_index=_frozen(temporal.astype(np.int64)),
        spatial_clip=d_s,
        temporal_clip=d_t,
    )
