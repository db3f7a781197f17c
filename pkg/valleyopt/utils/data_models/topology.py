from functools import cached_property
from typing import Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ValleyTopology(BaseModel):
    """ Arborescent geometry of a valley.

    ``parent[i]`` is the index of the dam receiving the outflow of dam ``i``, or ``None`` for an outlet.
    Dams are indexed by position, not by their file id.
    """
    model_config = ConfigDict(frozen=True)

    n_dams: int = Field(ge=1)
    parent: Tuple[Optional[int], ...]

    @model_validator(mode="after")
    def check_forest(self) -> "ValleyTopology":
        errors = []
        if len(self.parent) != self.n_dams:
            errors.append(f"parent has {len(self.parent)} entries for {self.n_dams} dams")
        for i, p in enumerate(self.parent):
            if p is None:
                continue
            if not 0 <= p < self.n_dams:
                errors.append(f"dam {i} flows into unknown dam {p}")
            elif p == i:
                errors.append(f"dam {i} flows into itself")
        if not errors:
            graph = self._build_graph()
            if not nx.is_directed_acyclic_graph(graph):
                cycle = nx.find_cycle(graph)
                errors.append(f"flow cycle {[edge[0] for edge in cycle]}")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def _build_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n_dams))
        graph.add_edges_from((i, p) for i, p in enumerate(self.parent) if p is not None)
        return graph

    @cached_property
    def graph(self) -> nx.DiGraph:
        """ Directed graph with one edge from each dam to its downstream dam """
        return self._build_graph()

    @cached_property
    def children(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(sorted(self.graph.predecessors(i))) for i in range(self.n_dams))

    @cached_property
    def order(self) -> Tuple[int, ...]:
        """ Upstream-to-downstream order, lowest index first among ready dams """
        return tuple(nx.lexicographical_topological_sort(self.graph))

    @cached_property
    def links(self) -> Tuple[int, ...]:
        """ Dams whose outflow feeds another dam: one coupling equation each """
        return tuple(i for i in range(self.n_dams) if self.parent[i] is not None)

    @cached_property
    def outlets(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n_dams) if self.parent[i] is None)

    @classmethod
    def chain(cls, n_dams: int) -> "ValleyTopology":
        return cls(n_dams=n_dams, parent=tuple(i + 1 if i + 1 < n_dams else None for i in range(n_dams)))
