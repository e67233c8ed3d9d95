from __future__ import annotations
from typing import Dict, List, Tuple
import numpy as np
from scipy.special import expit


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def init_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    """
    Uniform initialization in (-s, s) with s = sqrt(6 / (fan_in + fan_out)).
    :param rng: The generator.
    :param shape: Shape of the weight.
    :param fan_in: Number of inputs of a unit.
    :param fan_out: Number of outputs of a unit.
    :return: The weights.
    """
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


class Node:
    """
    Base class for layer nodes. Nodes form a chain through their 'next' edges which is used to draw the
    architecture. Parameters live in a ParameterAllocation shared by all nodes of a model; a node only keeps the
    names of its parameters.
    """

    def __init__(self, alloc, name: str, prev_node: Node = None, edge: str = 'next'):
        """
        Init the node.
        :param alloc: The ParameterAllocation of the model.
        :param name: Prefix of the parameter names of this node.
        :param prev_node: A previous node. Useful if you want a chain of nodes.
        :param edge: Connects to the previous node with an edge with this name.
        """
        self.alloc = alloc
        self.name = name
        self.edges: Dict[str, List[Node]] = {}
        self.param_names: List[str] = []
        if prev_node is not None:
            prev_node.add_edge(edge, self)

    def add_edge(self, name: str, node: Node):
        self.edges.setdefault(name, []).append(node)

    def allocate(self, suffix: str, init_data: np.ndarray) -> str:
        name = self.alloc.allocate(self.name + '.' + suffix, init_data)
        self.param_names.append(name)
        return name

    def p(self, name: str) -> np.ndarray:
        return self.alloc.params[name]

    def short_type(self) -> str:
        return type(self).__name__

    def get_descr(self) -> str:
        """
        Return a description of the node. Will be used to draw graphs.
        :return:
        """
        shapes = ', '.join('{}{}'.format(n.split('.')[-1], tuple(self.alloc.params[n].shape))
                           for n in self.param_names)
        return '{} {}\n{}'.format(self.short_type(), self.name, shapes) if shapes else self.short_type()

    def match(self, node_type) -> bool:
        return node_type is None or type(self) is node_type

    def walk(self):
        """
        All nodes reachable from this one, depth first, each once.
        """
        seen = set()
        stack = [self]
        while stack:
            n = stack.pop()
            if id(n) in seen:
                continue
            seen.add(id(n))
            yield n
            for targets in reversed(list(n.edges.values())):
                stack.extend(reversed(targets))


class LabelNode(Node):
    """
    A node without parameters, e.g. an input or an operation like the sum of context turn vectors, that only
    appears in the architecture graph.
    """

    def __init__(self, label: str, prev_node: Node = None, edge: str = 'next'):
        super().__init__(None, label, prev_node, edge)

    def get_descr(self) -> str:
        return self.name
