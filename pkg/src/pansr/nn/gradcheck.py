"""Finite-difference verification of the analytic gradients.

The check builds a float64 copy of an architecture, feeds a small random
input, and compares backpropagated gradients of a random linear readout
L = sum(output * R) against central differences (L(p+h) - L(p-h)) / 2h.  Full
architectures have too many parameters to difference exhaustively, so a fixed
number of entries is sampled per tensor; every tensor (and the input) appears
in the report.  Exhaustive per-layer checks live in the test suite.

Every op here is piecewise linear in any single scalar parameter (convs and
skips are linear; relu/prelu/maxpool are piecewise linear; a parameter enters
each forward path once), so central differences are *exact* up to roundoff --
unless a relu/pool kink falls strictly inside (p-h, p+h), which deep networks
hit occasionally.  Entries whose first estimate disagrees with the analytic
gradient are therefore re-estimated with successively halved steps until two
consecutive estimates agree, which isolates the kink; a genuinely wrong
gradient converges to the same (wrong) slope and still fails.
"""

from __future__ import annotations

import numpy as np

from .network import ArchitectureSpec, Network, build_architecture

_REL_FLOOR = 1e-6


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), _REL_FLOOR)


def grad_check(
    architecture: str | ArchitectureSpec,
    seed: int = 0,
    samples_per_tensor: int = 8,
    step: float = 1e-5,
    input_size: int = 8,
    tolerance: float = 1e-4,
) -> dict:
    """Return a per-tensor gradient error report for one architecture.

    `input_size` is the spatial size of the (1, 4, s, s) test input; it must be
    divisible by 4 for architectures with two pooling stages.
    """
    spec = architecture if isinstance(architecture, ArchitectureSpec) else build_architecture(architecture)
    net = Network(spec, dtype=np.float64)
    net.initialize(seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.uniform(0.05, 0.95, size=(1, net.in_channels, input_size, input_size))

    out = net.forward(x)
    readout = rng.uniform(-1.0, 1.0, size=out.shape)

    def loss() -> float:
        return float(np.sum(net.forward(x) * readout))

    base = float(np.sum(out * readout))
    net.zero_grads()
    grad_x = net.backward(readout, need_input_grad=True)
    analytic = {(idx, name): g.copy() for idx, name, _, g in net.param_tensors()}

    def check_entries(param: np.ndarray, grad: np.ndarray) -> tuple[float, int]:
        n_entries = min(samples_per_tensor, param.size)
        picks = rng.choice(param.size, size=n_entries, replace=False)
        flat = param.reshape(-1)
        worst = 0.0
        for i in picks:
            orig = flat[i]

            def fd(h: float) -> float:
                flat[i] = orig + h
                lp = loss()
                flat[i] = orig - h
                lm = loss()
                flat[i] = orig
                return (lp - lm) / (2.0 * h)

            a = float(grad.reshape(-1)[i])
            numeric = fd(step)
            if _rel_err(a, numeric) >= tolerance / 2.0:
                # Possible kink inside the step interval: halve until two
                # consecutive estimates agree (exact slope reached), keeping
                # the original-step estimate if roundoff prevents agreement.
                prev = numeric
                for k in range(1, 7):
                    cur = fd(step / 2.0**k)
                    if _rel_err(prev, cur) < 1e-5:
                        numeric = cur
                        break
                    prev = cur
            worst = max(worst, _rel_err(a, numeric))
        return worst, n_entries

    tensors = []
    overall = 0.0
    for idx, name, p, _ in net.param_tensors():
        err, n_entries = check_entries(p, analytic[(idx, name)])
        tensors.append(
            {
                "layer": idx,
                "kind": net.spec.layers[idx].kind,
                "name": name,
                "size": int(p.size),
                "checked": n_entries,
                "max_rel_err": err,
            }
        )
        overall = max(overall, err)

    input_err, _ = check_entries(x, grad_x)
    overall = max(overall, input_err)

    return {
        "architecture": spec.name,
        "seed": seed,
        "step": step,
        "samples_per_tensor": samples_per_tensor,
        "input_size": input_size,
        "loss": base,
        "tensors": tensors,
        "input_max_rel_err": input_err,
        "max_rel_err": overall,
        "tolerance": tolerance,
        "passed": bool(overall < tolerance),
    }
