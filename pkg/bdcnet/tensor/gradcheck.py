"""Finite-difference oracles for checking analytic gradients."""

from collections.abc import Callable, Sequence

import numpy as np

from .core import Tensor


def numerical_gradients(
    fn: Callable[..., Tensor],
    arrays: Sequence[np.ndarray],
    eps: float = 1e-6,
) -> list[np.ndarray]:
    """Central differences of the scalar ``fn(*tensors)`` w.r.t. each input array."""
    arrays = [np.array(a, copy=True) for a in arrays]
    grads = []
    for index, array in enumerate(arrays):
        grad = np.zeros_like(array, dtype=np.float64)
        flat = array.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + eps
            plus = _evaluate(fn, arrays)
            flat[k] = original - eps
            minus = _evaluate(fn, arrays)
            flat[k] = original
            grad.reshape(-1)[k] = (plus - minus) / (2 * eps)
        grads.append(grad.astype(arrays[index].dtype))
    return grads


def analytic_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    fn(*tensors).backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error ||a - n|| / max(||a|| + ||n||, tiny)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def _evaluate(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]) -> float:
    return fn(*(Tensor(a) for a in arrays)).item()
