"""Independent reference implementations the tests check the package against.

Everything here is written the slow, obvious way (explicit loops, no shared
code with the package) so a bug in the package cannot hide in its own oracle.
"""

import math

import numpy as np


def numeric_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar-valued f with respect to x.

    Mutates and restores x in place; x must be float64 for the quoted
    tolerances to hold.
    """
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = f()
        flat_x[i] = orig - h
        f_minus = f()
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute difference normalized by the gradients' overall scale.

    Norm-scale normalization keeps exact zeros and denormal-noise entries
    from blowing up the ratio while still flagging any real mismatch, which
    is O(scale) by construction.
    """
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    return float(np.abs(analytic - numeric).max(initial=0.0) / (scale + 1e-12))


def loop_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.result_type(a, b))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def loop_conv2d_valid(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Single-channel valid-region cross-correlation, nested loops."""
    ih, iw = image.shape
    kh, kw = kernel.shape
    out = np.zeros((ih - kh + 1, iw - kw + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            s = 0.0
            for di in range(kh):
                for dj in range(kw):
                    s += image[i + di, j + dj] * kernel[di, dj]
            out[i, j] = s
    return out


def reference_adam(theta0: float, grad_fn, steps: int, lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> list[float]:
    """Scalar Adam, transcribed step by step from the update equations."""
    theta, m, v = float(theta0), 0.0, 0.0
    trajectory = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        trajectory.append(theta)
    return trajectory


def counting_confusion(true_labels, pred_labels, k: int) -> np.ndarray:
    """Per-pair counting, one increment at a time."""
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        counts[t][p] += 1
    return counts


def counting_report(counts: np.ndarray) -> dict:
    """Precision/recall/F1/support from raw TP/FP/FN counting loops."""
    k = counts.shape[0]
    total = int(counts.sum())
    precision, recall, f1, support = [], [], [], []
    for c in range(k):
        tp = int(counts[c][c])
        fp = sum(int(counts[r][c]) for r in range(k)) - tp
        fn = sum(int(counts[c][r]) for r in range(k)) - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
        support.append(tp + fn)
    accuracy = sum(int(counts[c][c]) for c in range(k)) / total
    macro = (sum(precision) / k, sum(recall) / k, sum(f1) / k)
    weighted = (
        sum(p * s for p, s in zip(precision, support)) / total,
        sum(r * s for r, s in zip(recall, support)) / total,
        sum(f * s for f, s in zip(f1, support)) / total,
    )
    return {
        "precision": np.array(precision), "recall": np.array(recall),
        "f1": np.array(f1), "support": np.array(support),
        "accuracy": accuracy, "macro": macro, "weighted": weighted,
    }


class FixedMaskRng:
    """Duck-typed stand-in for a Generator whose .random() replays one draw.

    Lets finite differences see dropout as a fixed deterministic linear map.
    """

    def __init__(self, uniforms: np.ndarray):
        self.uniforms = uniforms

    def random(self, shape):
        assert tuple(shape) == self.uniforms.shape
        return self.uniforms.copy()


def separated_pool_input(rng: np.random.Generator, shape, gap: float = 1e-3) -> np.ndarray:
    """Random tensor whose 2x2 pool windows have no near-ties, so finite
    differences cannot cross an argmax kink."""
    while True:
        x = rng.random(shape)
        b, h, w, c = x.shape
        windows = x.reshape(b, h // 2, 2, w // 2, 2, c)
        windows = windows.transpose(0, 1, 3, 5, 2, 4).reshape(-1, 4)
        sorted_w = np.sort(windows, axis=1)
        if np.diff(sorted_w, axis=1).min() > gap:
            return x


def kink_free(rng: np.random.Generator, shape, margin: float = 1e-2) -> np.ndarray:
    """Random tensor with every entry at least ``margin`` from zero, keeping
    finite differences away from the LeakyReLU kink."""
    x = rng.standard_normal(shape)
    return x + np.where(x >= 0, margin, -margin)
