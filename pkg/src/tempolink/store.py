"""Temporal edge storage and the per-node neighbor index.

Edges arrive as three parallel arrays (src, dst, t) sorted by time, ties
broken by input order. The index keeps three CSR layouts over them:

  * source-role events per node, time-sorted: feeds recent-history windows
  * merged-role activity per node, time-sorted: feeds last-activity lookups
  * per-source (dst, time)-sorted pairs: feeds repeat counts

All queries are strict: only events with time < t are visible at t, so a
query at an edge's own timestamp never sees that edge.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import kernels


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    t: float


@dataclass
class GraphMeta:
    """Node-universe description carried alongside an edge array.

    For bipartite graphs `dst_nodes` is the candidate partition; sampling
    and ranking draw destinations from it. Non-bipartite graphs leave it
    None and every node is a legal destination.
    """

    num_nodes: int
    bipartite: bool = False
    dst_nodes: Optional[np.ndarray] = None

    def candidate_pool(self) -> np.ndarray:
        if self.bipartite:
            if self.dst_nodes is None:
                raise ValueError("bipartite graph without a destination partition")
            return np.asarray(self.dst_nodes, dtype=np.int64)
        return np.arange(self.num_nodes, dtype=np.int64)


def validate_edges(src, dst, t, num_nodes):
    """Check ordering and id ranges, raising with the first bad ordinal."""
    src = np.asarray(src)
    dst = np.asarray(dst)
    t = np.asarray(t)
    if not (src.shape == dst.shape == t.shape) or src.ndim != 1:
        raise ValueError("src, dst, t must be 1-d arrays of equal length")
    if src.size:
        drop = np.nonzero(np.diff(t) < 0)[0]
        if drop.size:
            i = int(drop[0]) + 1
            raise ValueError(
                f"timestamps not sorted: edge {i} has t={t[i]} after t={t[i - 1]}"
            )
        for name, arr in (("src", src), ("dst", dst)):
            bad = np.nonzero((arr < 0) | (arr >= num_nodes))[0]
            if bad.size:
                i = int(bad[0])
                raise ValueError(
                    f"{name} id {arr[i]} at edge {i} outside [0, {num_nodes})"
                )


def _group_ptr(keys, num_nodes):
    """CSR pointer array over key-grouped rows (keys already countable)."""
    counts = np.bincount(keys, minlength=num_nodes)
    ptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr


@dataclass
class NeighborIndex:
    num_nodes: int
    # source-role events: peer/time of edges where the node is src
    ev_ptr: np.ndarray = field(repr=False)
    ev_peer: np.ndarray = field(repr=False)
    ev_time: np.ndarray = field(repr=False)
    # merged-role activity times (node appears as src or dst)
    act_ptr: np.ndarray = field(repr=False)
    act_time: np.ndarray = field(repr=False)
    # per-source pairs sorted by (dst, time)
    pc_ptr: np.ndarray = field(repr=False)
    pc_dst: np.ndarray = field(repr=False)
    pc_time: np.ndarray = field(repr=False)

    # -- batched queries (kernel-backed) ------------------------------------

    def recent_neighbors_batch(self, nodes, times, k):
        """Most recent k source-role neighbors strictly before each time.

        Returns (peer[B,k], time[B,k], n[B]). Events sit in the rightmost
        slots, oldest to newest, so column k-1 is the most recent; unused
        left slots hold peer=-1, time=0.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        nodes = np.ascontiguousarray(nodes, dtype=np.int64)
        times = np.ascontiguousarray(times, dtype=np.float64)
        B = nodes.shape[0]
        out_peer = np.full((B, k), -1, dtype=np.int64)
        out_time = np.zeros((B, k), dtype=np.float64)
        out_n = np.zeros(B, dtype=np.int64)
        kernels.recent_window(
            self.ev_ptr, self.ev_peer, self.ev_time, nodes, times, k,
            out_peer, out_time, out_n,
        )
        return out_peer, out_time, out_n

    def last_activity_batch(self, nodes, times):
        """Latest either-role event time strictly before each query time.

        Returns (t[B], has[B]); has[b]=0 flags a node with no prior
        activity, in which case t[b] is 0 and must not be read as a time.
        """
        nodes = np.ascontiguousarray(nodes, dtype=np.int64)
        times = np.ascontiguousarray(times, dtype=np.float64)
        B = nodes.shape[0]
        out_t = np.zeros(B, dtype=np.float64)
        out_has = np.zeros(B, dtype=np.int64)
        kernels.last_before(self.act_ptr, self.act_time, nodes, times, out_t, out_has)
        return out_t, out_has

    def repeat_count_batch(self, srcs, dsts, times):
        """Number of prior (src, dst) edges strictly before each time."""
        srcs = np.ascontiguousarray(srcs, dtype=np.int64)
        dsts = np.ascontiguousarray(dsts, dtype=np.int64)
        times = np.ascontiguousarray(times, dtype=np.float64)
        out = np.zeros(srcs.shape[0], dtype=np.int64)
        kernels.pair_count(self.pc_ptr, self.pc_dst, self.pc_time, srcs, dsts, times, out)
        return out

    # -- single-query convenience wrappers ----------------------------------

    def recent_neighbors(self, node, t, k):
        peer, time, n = self.recent_neighbors_batch(
            np.array([node]), np.array([float(t)]), k
        )
        m = int(n[0])
        return peer[0, k - m:], time[0, k - m:]

    def last_activity(self, node, t) -> Optional[float]:
        tt, has = self.last_activity_batch(np.array([node]), np.array([float(t)]))
        return float(tt[0]) if has[0] else None

    def repeat_count(self, src, dst, t) -> int:
        out = self.repeat_count_batch(
            np.array([src]), np.array([dst]), np.array([float(t)])
        )
        return int(out[0])

    def degree(self, node) -> int:
        return int(self.ev_ptr[node + 1] - self.ev_ptr[node])


def build_index(src, dst, t, num_nodes) -> NeighborIndex:
    """Build all three CSR layouts from time-sorted edge arrays."""
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    validate_edges(src, dst, t, num_nodes)

    # source-role: stable sort by src keeps the time order inside each group
    order = np.argsort(src, kind="stable")
    ev_ptr = _group_ptr(src, num_nodes)
    ev_peer = dst[order]
    ev_time = t[order]

    # merged-role: interleave src/dst occurrences so position order stays
    # time order, then group by node the same way
    m = src.shape[0]
    nodes2 = np.empty(2 * m, dtype=np.int64)
    nodes2[0::2] = src
    nodes2[1::2] = dst
    times2 = np.repeat(t, 2)
    order2 = np.argsort(nodes2, kind="stable")
    act_ptr = _group_ptr(nodes2, num_nodes)
    act_time = times2[order2]

    # pair counts: grouped by src, sorted by (dst, time) inside each group
    order3 = np.lexsort((t, dst, src))
    pc_ptr = _group_ptr(src, num_nodes)
    pc_dst = dst[order3]
    pc_time = t[order3]

    return NeighborIndex(
        num_nodes=num_nodes,
        ev_ptr=ev_ptr, ev_peer=ev_peer, ev_time=ev_time,
        act_ptr=act_ptr, act_time=act_time,
        pc_ptr=pc_ptr, pc_dst=pc_dst, pc_time=pc_time,
    )
