"""Dense tensors with reverse-mode automatic differentiation."""

import logging
from abc import abstractmethod
from typing import Any

import numpy as np

from ..errors import TensorUsageError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32


class Function:
    """Base class for differentiable operations.

    Subclasses implement ``forward`` on raw arrays and ``backward``, which receives
    dL/d(output) and returns one gradient (or ``None``) per input tensor.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError

    def needs_grad(self, index: int) -> bool:
        """Whether the input at ``index`` takes part in differentiation."""
        return self.inputs[index].requires_grad

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        """Run the forward pass and record the operation on the output tensor."""
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None)


class Tensor:
    """A dense array that optionally records the operations producing it."""

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: Any = None,
        creator: Function | None = None,
        name: str | None = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.creator = creator
        self.name = name
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorUsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """A new leaf tensor sharing no graph with this one."""
        return Tensor(self.data.copy(), requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add

        return add(self, other)

    def __mul__(self, factor: float) -> "Tensor":
        from .ops import scale

        return scale(self, factor)

    __rmul__ = __mul__

    def backward(self) -> None:
        """Propagate gradients from this scalar to every tensor that requires them.

        Leaf tensors accumulate into ``grad`` so several backward passes can be summed
        (gradient accumulation over a batch); intermediate tensors have ``grad`` overwritten.
        """
        if self.data.size != 1:
            raise TensorUsageError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise TensorUsageError("backward() called on a tensor that does not require grad")

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            node.grad = grad
            input_grads = node.creator.backward(grad)
            for parent, g in zip(node.creator.inputs, input_grads, strict=True):
                if g is None or not parent.requires_grad:
                    continue
                if g.shape != parent.shape:
                    raise TensorUsageError(
                        f"{type(node.creator).__name__} produced gradient of shape {g.shape} "
                        f"for an input of shape {parent.shape}"
                    )
                key = id(parent)
                grads[key] = g if key not in grads else grads[key] + g


def _topological_order(root: Tensor) -> list[Tensor]:
    """Post-order of the recorded graph; every node appears exactly once."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in visited:
            continue
        if expanded:
            visited.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        if node.creator is not None:
            stack.extend((p, False) for p in node.creator.inputs if p.requires_grad)
    return order


def parameter(shape: tuple[int, ...], data: np.ndarray | None = None, name: str | None = None) -> Tensor:
    """A trainable float32 leaf tensor, zero-filled unless ``data`` is given."""
    values = np.zeros(shape, dtype=DEFAULT_DTYPE) if data is None else data.astype(DEFAULT_DTYPE)
    return Tensor(values, requires_grad=True, name=name)
