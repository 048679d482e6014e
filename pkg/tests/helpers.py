"""Random problem instances, oracles and the acceptance registry shared by the tests."""
import mpmath as mp
import numpy as np

from mpspline.basis import basis_of_dimension
from mpspline.design import inner_products
from mpspline.simulate import SimulationConfig, gen_curves, gen_responses


def instance(seed, n=50, dim=12, error="gaussian", beta="b1", q=2, outliers=0.0):
    """(design, y, data) for a well-spaced problem with optional shifted responses."""
    rng = np.random.default_rng(seed)
    cfg = SimulationConfig(n=n)
    data = gen_responses(gen_curves(cfg, rng), beta, error, rng)
    y = np.array(data.responses)
    if outliers:
        m = int(round(outliers * n))
        y[:m] += 10.0
        data = data.with_responses(y)
    design = inner_products(data, basis_of_dimension(dim), q)
    return design, y, data


def ridge_exact(Z, y, lam, D=None, root=None):
    """(Z'Z + 2 n lam D)^-1 Z'y in 50-digit arithmetic, with D or D = root'root."""
    with mp.workdps(50):
        Zm = mp.matrix(Z.tolist())
        if root is not None:
            Rm = mp.matrix(root.tolist())
            Dm = Rm.T * Rm
        else:
            Dm = mp.matrix(D.tolist())
        A = Zm.T * Zm + 2 * y.size * lam * Dm
        x = mp.lu_solve(A, Zm.T * mp.matrix(y.tolist()))
        return np.array(x.tolist(), dtype=float).ravel()


# acceptance criterion number -> report line, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
