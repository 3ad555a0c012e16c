"""
Algorithms Package
Graph search and point-set alignment kernels shared by the skeleton and
metrics modules.
"""

from algorithms.bfs import bfs, hop_distances
from algorithms.procrustes import procrustes_align

__all__ = ['bfs', 'hop_distances', 'procrustes_align']
