import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def direct_circular_convolution(kernel, x):
    """O(N^2) periodic convolution with the kernel centered at (kh//2, kw//2)."""
    kh, kw = kernel.shape
    H, W = x.shape
    out = np.zeros_like(x, dtype=float)
    for i in range(H):
        for j in range(W):
            acc = 0.0
            for k in range(kh):
                for l in range(kw):
                    acc += kernel[k, l] * x[(i - (k - kh // 2)) % H, (j - (l - kw // 2)) % W]
            out[i, j] = acc
    return out


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def grid_prox(x0, K, p, step=1e-6):
    """Minimize K|x|^p + (x - x0)^2 / 2 over x in [0, |x0|] by grid search.

    A coarse pass locates the bracket, then a pass at ``step`` resolution
    refines it; the objective is convex so the refinement is exact.
    """
    b = abs(x0)
    if b == 0:
        return 0.0
    def f(q):
        return K * q**p + 0.5 * (q - b) ** 2
    coarse = np.linspace(0.0, b, 20001)
    q0 = coarse[np.argmin(f(coarse))]
    h = b / 20000
    fine = np.arange(max(0.0, q0 - 2 * h), min(b, q0 + 2 * h) + step, step)
    fine = fine[fine <= b]
    return float(np.sign(x0) * fine[np.argmin(f(fine))])


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
