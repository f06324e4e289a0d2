from typing import Dict, List, Optional

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


def topological_order(output: Tensor) -> List[Tensor]:
    """
    Returns every tensor that requires a gradient and that `output` depends
    on, inputs before the tensors computed from them. The traversal is
    iterative so deep graphs do not hit the recursion limit.
    """
    order: List[Tensor] = []
    visited = set()
    stack = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.operation is not None:
            for parent in node.operation.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


class Graph:

    """
    The recorded operations leading to `output`, in topological order.
    Replaying them in reverse propagates a gradient from the output to every
    leaf tensor with `requires_grad` set.
    """

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes = topological_order(output) if output.requires_grad else []

    @property
    def leaves(self) -> List[Tensor]:
        return [node for node in self.nodes if node.operation is None]

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        if grad is None:
            grad = np.ones_like(self.output.data)
        grads: Dict[int, np.ndarray] = {id(self.output): grad}
        for node in reversed(self.nodes):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node.operation is None:
                # leaves accumulate across backward calls
                if node.grad is None:
                    node.grad = np.array(node_grad, dtype=node.dtype)
                else:
                    node.grad = node.grad + node_grad
                continue
            input_grads = node.operation.backward(node_grad)
            for parent, parent_grad in zip(node.operation.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad


def backward(loss: Tensor) -> None:
    """
    Propagates the gradient of a scalar `loss` into all leaves it depends on.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    Graph(loss).backward()
