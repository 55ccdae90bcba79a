"""
Strategy graphs: a DAG of tactics where each tactic owns a slice of the joint action and conditions on
the actions of its parents. The joint policy is the chain-rule product of the per-tactic policies, evaluated in
topological order.
"""
import re
from dataclasses import dataclass, field

import networkx as nx
import torch

from src.common.exceptions import DimensionError, GraphCycleError, GraphReferenceError, SequencingError
from src.constants import GRAPH_SCHEMA_VERSION

NODE_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class TacticNode:
    """
    One tactic of the strategy.

    Args:
        id (str): Unique node id.
        action_dims (int): Width of this tactic's slice of the joint action.
        parent_ids (tuple of str): Parents, in the order their actions are concatenated to the conditioning input.
    """
    id: str
    action_dims: int
    parent_ids: tuple = field(default_factory=tuple)


class StrategyGraph:
    """
    A validated DAG of `TacticNode`s. Construction validates the graph, so every instance is acyclic with intact
    references, and it is never mutated afterwards.
    """
    def __init__(self, nodes):
        """
        Args:
            nodes (list of TacticNode): The nodes, in declaration order.

        Raises:
            GraphReferenceError: On duplicate ids, dangling or self parents, malformed ids or non-positive dims.
            GraphCycleError: If the graph has a directed cycle.
        """
        self.nodes = tuple(TacticNode(node.id, node.action_dims, tuple(node.parent_ids)) for node in nodes)
        validate(self)
        self._by_id = {node.id: node for node in self.nodes}
        self._order = _lexicographic_topological_order(self.nodes)
        self._slices = {}
        start = 0
        for node_id in self._order:
            width = self._by_id[node_id].action_dims
            self._slices[node_id] = slice(start, start + width)
            start += width

    @property
    def m(self):
        return len(self.nodes)

    @property
    def total_action_dim(self):
        return sum(node.action_dims for node in self.nodes)

    @property
    def node_ids(self):
        return [node.id for node in self.nodes]

    def node(self, node_id):
        return self._by_id[node_id]

    def topological_order(self):
        return topological_order(self)

    def action_slices(self):
        """
        Returns:
            dict of str: slice: Where each node's action lives in the joint action vector. The global layout is the
                topological order.
        """
        return dict(self._slices)

    def parents_of(self, node_id):
        return list(self._by_id[node_id].parent_ids)

    def children_of(self, node_id):
        return sorted(node.id for node in self.nodes if node_id in node.parent_ids)

    def conditioning_width(self, node_id, obs_dim):
        return obs_dim + sum(self._by_id[parent].action_dims for parent in self._by_id[node_id].parent_ids)

    def to_dict(self):
        nodes = [{"id": node.id, "action_dims": node.action_dims, "parents": list(node.parent_ids)}
                 for node in self.nodes]
        return {"schema_version": GRAPH_SCHEMA_VERSION, "nodes": nodes}

    @classmethod
    def from_dict(cls, graph_dict):
        """
        Build a graph from its json form `{"schema_version": 1, "nodes": [{"id", "action_dims", "parents"}]}`.

        Raises:
            GraphReferenceError: If the document is malformed or has an unsupported schema version.
        """
        version = graph_dict.get("schema_version", GRAPH_SCHEMA_VERSION)
        if version != GRAPH_SCHEMA_VERSION:
            message = f"Unsupported graph schema version. Must be {GRAPH_SCHEMA_VERSION}. Was {version}. "
            raise GraphReferenceError(message)
        if "nodes" not in graph_dict or not isinstance(graph_dict["nodes"], list):
            raise GraphReferenceError(f"Graph definition needs a list under `nodes`. Was {graph_dict}. ")
        nodes = []
        for entry in graph_dict["nodes"]:
            try:
                nodes.append(TacticNode(str(entry["id"]), int(entry["action_dims"]),
                                        tuple(str(parent) for parent in entry.get("parents", []))))
            except (KeyError, TypeError, ValueError) as error:
                raise GraphReferenceError(f"Malformed node definition {entry}. {error}") from error
        return cls(nodes)

    def __eq__(self, other):
        return isinstance(other, StrategyGraph) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        edges = [f"{parent}->{node.id}" for node in self.nodes for parent in node.parent_ids]
        return f"StrategyGraph(m={self.m}, total_action_dim={self.total_action_dim}, edges={edges})"


def _to_networkx(nodes):
    digraph = nx.DiGraph()
    for node in nodes:
        digraph.add_node(node.id)
    for node in nodes:
        for parent in node.parent_ids:
            digraph.add_edge(parent, node.id)
    return digraph


def _lexicographic_topological_order(nodes):
    return list(nx.lexicographical_topological_sort(_to_networkx(nodes)))


def validate(graph):
    """
    Check reference integrity, dims and acyclicity.

    Args:
        graph (StrategyGraph or list of TacticNode): The graph (or bare nodes) to check.

    Raises:
        GraphReferenceError: On an empty graph, duplicate or malformed ids, non-positive `action_dims`,
            a parent listed twice, a self parent or a dangling parent.
        GraphCycleError: If there is a directed cycle. The error names the cycle.
    """
    nodes = graph.nodes if isinstance(graph, StrategyGraph) else list(graph)
    if len(nodes) == 0:
        raise GraphReferenceError("A strategy graph needs at least one node. ")
    seen = set()
    for node in nodes:
        if not isinstance(node.id, str) or not NODE_ID_PATTERN.match(node.id):
            raise GraphReferenceError(f"Node ids must match {NODE_ID_PATTERN.pattern}. Was {node.id!r}. ")
        if node.id in seen:
            raise GraphReferenceError(f"Duplicate node id `{node.id}`. ")
        seen.add(node.id)
        if not isinstance(node.action_dims, int) or node.action_dims < 1:
            raise GraphReferenceError(f"Node `{node.id}` needs positive `action_dims`. Was {node.action_dims}. ")
        if len(set(node.parent_ids)) != len(node.parent_ids):
            raise GraphReferenceError(f"Node `{node.id}` lists a parent twice. Was {list(node.parent_ids)}. ")
    for node in nodes:
        for parent in node.parent_ids:
            if parent == node.id:
                raise GraphReferenceError(f"Node `{node.id}` lists itself as parent. ")
            if parent not in seen:
                raise GraphReferenceError(f"Node `{node.id}` has unknown parent `{parent}`. ")
    cycle = find_cycle(nodes)
    if cycle:
        raise GraphCycleError(f"Strategy graph has a cycle: {' -> '.join(cycle + [cycle[0]])}. ", cycle=cycle)


def find_cycle(nodes):
    """
    Returns:
        list of str: Node ids on one directed cycle, in edge order, or an empty list if the graph is acyclic.
    """
    digraph = _to_networkx(nodes)
    try:
        edges = nx.find_cycle(digraph, orientation="original")
    except nx.NetworkXNoCycle:
        return []
    return [edge[0] for edge in edges]


def topological_order(graph):
    """
    The conditioning order of the chain-rule factorization. Every node comes after all its parents, and among
    nodes that are ready at the same time the lexicographically smallest id goes first.

    Args:
        graph (StrategyGraph): A (validated) graph.

    Returns:
        list of str: Node ids.
    """
    return list(graph._order)


def conditioning_input(graph, node_id, state, sampled):
    """
    Input to the sub-policy of `node_id`: the state followed by the parents' actions in `parent_ids` order.
    Works for single vectors and for batches (concatenation along the last axis).

    Args:
        graph (StrategyGraph): The graph.
        node_id (str): The node to build input for.
        state (torch.Tensor): [obs_dim] or [batch x obs_dim] observation.
        sampled (dict of str: torch.Tensor): Already sampled (post-squash) action slices by node id.

    Raises:
        SequencingError: If a parent has not been sampled yet.
        DimensionError: If a parent's slice does not have that parent's width.

    Returns:
        torch.Tensor: [obs_dim + sum of parent action dims] (or batched) conditioning input.
    """
    node = graph.node(node_id)
    parts = [state]
    for parent in node.parent_ids:
        if parent not in sampled:
            raise SequencingError(f"Node `{node_id}` needs the action of parent `{parent}`, which is not sampled. ")
        action = sampled[parent]
        if action.shape[-1] != graph.node(parent).action_dims:
            message = f"Action of `{parent}` must have width {graph.node(parent).action_dims}. "
            message += f"Was {action.shape[-1]}. "
            raise DimensionError(message)
        parts.append(action)
    if len(parts) == 1:
        return state
    return torch.cat(parts, dim=-1)


def single_node_graph(action_dim, node_id="policy"):
    """
    The degenerate strategy with one tactic owning the whole action, which makes the joint policy a standard
    monolithic SAC policy.
    """
    return StrategyGraph([TacticNode(node_id, int(action_dim), ())])


def chain_graph(action_dims, prefix="t"):
    """
    Chain t1 -> t2 -> ... -> tm.

    Args:
        action_dims (list of int): Width of each tactic, in chain order.
        prefix (str): Id prefix.
    """
    nodes = []
    for i, dims in enumerate(action_dims):
        parents = (f"{prefix}{i}",) if i > 0 else ()
        nodes.append(TacticNode(f"{prefix}{i + 1}", int(dims), parents))
    return StrategyGraph(nodes)
