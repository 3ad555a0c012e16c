"""
Breadth-First Search (BFS) over a joint graph

Time Complexity: O(V + E) per source, V = joints, E = bones
Space Complexity: O(V) for the queue and depth table

BFS explores all neighbors at the current depth before moving to the next
level, so the depth at which a joint is first reached is its shortest-path
hop count from the source. Running it from every joint fills the hop-distance
matrix of a skeleton.

The search is a generator that yields after each visit, so callers can stream
the traversal or simply drain it.
"""

from collections import deque
from typing import Generator, Sequence, Tuple

import numpy as np


def bfs(neighbors: Sequence[Sequence[int]], source: int) -> Generator[Tuple[str, int, int], None, None]:
    """
    Breadth-first traversal from a single source joint.

    Time Complexity: O(V + E)
        - Every joint is enqueued at most once
        - Every bone is inspected twice (once from each end)

    Args:
        neighbors: Adjacency list, ``neighbors[i]`` = joints sharing a bone with i
        source: Starting joint

    Yields:
        ('visit', joint, depth) in non-decreasing depth order, source first
        with depth 0; unreachable joints are never yielded
    """
    queue = deque([source])
    depth = {source: 0}

    while queue:
        current = queue.popleft()
        yield ('visit', current, depth[current])

        for neighbor in neighbors[current]:
            if neighbor not in depth:
                depth[neighbor] = depth[current] + 1
                queue.append(neighbor)


def hop_distances(neighbors: Sequence[Sequence[int]]) -> np.ndarray:
    """
    All-pairs hop distances by running BFS from every joint.

    Time Complexity: O(V · (V + E))

    Args:
        neighbors: Adjacency list of the graph

    Returns:
        Integer matrix [V×V]; -1 where two joints are disconnected
    """
    n = len(neighbors)
    dist = np.full((n, n), -1, dtype=np.int64)
    for source in range(n):
        for _, joint, depth in bfs(neighbors, source):
            dist[source, joint] = depth
    return dist
