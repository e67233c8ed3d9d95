"""
Drawing the layer chain of a network ranker.
"""
from __future__ import annotations
import pydot
from dialrank.errors import ModelError


def _quote(text: str) -> str:
    return '"{}"'.format(text.replace('"', "'").replace('\n', '\\n'))


def architecture_graph(ranker) -> pydot.Dot:
    """
    Graph of all nodes reachable from the input node of a neural or dual encoder ranker, with the parameter shapes
    in the node labels.
    :param ranker: NeuralRanker or DualEncoderRanker.
    :return: The pydot graph, e.g. for write_raw() or write_png().
    """
    root = getattr(ranker, 'inputs', None)
    if root is None:
        raise ModelError('{} ranker has no layers to draw'.format(ranker.kind))
    graph = pydot.Dot(graph_type='digraph', rankdir='TB')
    names = {}
    nodes = list(root.walk())
    for i, node in enumerate(nodes):
        names[id(node)] = 'n{}'.format(i)
        graph.add_node(pydot.Node(names[id(node)], label=_quote(node.get_descr()), shape='box'))
    for node in nodes:
        for edge, targets in node.edges.items():
            for target in targets:
                graph.add_edge(pydot.Edge(names[id(node)], names[id(target)], label=edge))
    return graph
