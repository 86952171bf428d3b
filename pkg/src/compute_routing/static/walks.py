"""Order link-traversal counts into a single walk."""

from __future__ import annotations

import numpy as np

from ..netmodel import Network, NodeId


class DisconnectedWalkError(ValueError):
    """The traversal counts cannot be covered by one source-to-sink walk."""


def extract_walks(
    traversals, network: Network, source: NodeId, sink: NodeId
) -> list:
    """Return link ids of a walk from ``source`` to ``sink`` using link ``e``
    exactly ``traversals[e]`` times.

    This is Hierholzer's construction on the multigraph of traversals; the
    lowest-index unused link is taken first so the result is deterministic.
    """
    u = np.rint(np.asarray(traversals, dtype=float)).astype(int)
    if np.any(u < 0):
        raise ValueError("traversal counts must be nonnegative")
    balance = np.zeros(network.num_nodes, dtype=int)
    np.add.at(balance, network.src_index, u)
    np.add.at(balance, network.dst_index, -u)
    expected = np.zeros(network.num_nodes, dtype=int)
    expected[network.node_index[source]] += 1
    expected[network.node_index[sink]] -= 1
    if not np.array_equal(balance, expected):
        raise DisconnectedWalkError("traversal counts are not degree-balanced")

    remaining = u.copy()
    pointer = [0] * network.num_nodes
    out = network.out_lists
    stack: list[tuple[int, int | None]] = [(network.node_index[source], None)]
    order: list[int] = []
    while stack:
        v, via = stack[-1]
        links = out[v]
        while pointer[v] < len(links) and remaining[links[pointer[v]]] == 0:
            pointer[v] += 1
        if pointer[v] < len(links):
            e = links[pointer[v]]
            remaining[e] -= 1
            stack.append((int(network.dst_index[e]), e))
        else:
            stack.pop()
            if via is not None:
                order.append(via)
    if remaining.any() or len(order) != int(u.sum()):
        raise DisconnectedWalkError("traversal support is not connected to the source")
    order.reverse()
    return [network.links[e].id for e in order]


def walk_nodes(network: Network, walk: list, source: NodeId) -> list[NodeId]:
    """Node sequence visited by a walk given as link ids."""
    nodes = [source]
    for lid in walk:
        link = network.link(lid)
        if link.src != nodes[-1]:
            raise ValueError(f"link {lid} does not continue the walk at {nodes[-1]}")
        nodes.append(link.dst)
    return nodes


def walk_counts(network: Network, walk: list) -> np.ndarray:
    counts = np.zeros(network.num_links, dtype=int)
    for lid in walk:
        counts[network.link_index[lid]] += 1
    return counts
