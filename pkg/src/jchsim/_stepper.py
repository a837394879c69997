"""Inner trajectory-stepping kernel with selectable backend.

The kernel integrates one quantum trajectory on a fixed time grid:
between jumps the (unnormalized) state is advanced by precomputed
fixed-step propagator matrices; a jump is triggered when the decaying
norm crosses a pre-drawn uniform threshold (waiting-time algorithm),
located first to the enclosing elementary step by dyadic bisection over
the precomputed propagator powers, then inside that step by continuous
bisection of the degree-4 Taylor polynomial of the generator, which is
what the fixed-step integrator applies per step.

``JCHSIM_BACKEND`` selects the implementation:

- ``numba`` (default when importable): the same function body compiled
  with ``numba.njit(cache=True, nogil=True)``.
- ``numpy``: the plain-Python/NumPy body.

Both backends run the identical algorithm; results are deterministic
per backend.  Bit equality across backends is not guaranteed (different
matmul code paths).
"""
from __future__ import annotations

import os
import warnings

import numpy as np

__all__ = ["BACKEND", "HAVE_NUMBA", "trajectory_kernel", "STATUS_OK",
           "STATUS_BUFFER_EXHAUSTED", "STATUS_NORM_UNDERFLOW"]

STATUS_OK = 0
STATUS_BUFFER_EXHAUSTED = 1
STATUS_NORM_UNDERFLOW = 2

_requested = os.environ.get("JCHSIM_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    warnings.warn(f"JCHSIM_BACKEND={_requested!r} not recognized; using 'numpy'",
                  stacklevel=1)
    _requested = "numpy"

HAVE_NUMBA = False
if _requested != "numpy":
    try:
        import numba  # type: ignore

        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise ImportError(
                "JCHSIM_BACKEND=numba was requested but numba is not importable")

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _norm2_impl(x):
    s = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        s += v.real * v.real + v.imag * v.imag
    return s


def _kernel_impl(r_stride, r_pows, gen, collapse, psi0, n_fine, dt,
                 spacing, uniforms, states, jump_times, jump_channels,
                 bisect_tol):
    """Integrate one trajectory; fills ``states``/``jump_*`` in place.

    Returns (n_jumps, n_uniforms_used, status).  ``states`` receives the
    normalized state at each sample time; the working state keeps its
    decaying norm between samples because the norm carries the
    waiting-time information.
    """
    n_samples = states.shape[0]
    d = psi0.shape[0]
    n_chan = collapse.shape[0]
    max_jumps = jump_times.shape[0]
    weights = np.empty(n_chan, dtype=np.float64)

    used = 0
    n_jumps = 0
    if used >= uniforms.shape[0]:
        return n_jumps, used, STATUS_BUFFER_EXHAUSTED
    r = uniforms[used]
    used += 1
    if r <= 0.0:
        r = 1e-300

    work = psi0.copy()
    inv = 1.0 / np.sqrt(_norm2(work))
    for i in range(d):
        states[0, i] = work[i] * inv

    for s in range(1, n_samples):
        stride_start = (s - 1) * spacing
        cand = r_stride @ work
        if _norm2(cand) > r:
            work = cand
        else:
            # at least one jump inside this stride: redo it step-resolved
            steps_done = 0
            while steps_done < n_fine:
                if _norm2(work) < 1e-28:
                    return n_jumps, used, STATUS_NORM_UNDERFLOW
                # largest dyadic block of elementary steps that fits
                rem = n_fine - steps_done
                p = 0
                while (1 << (p + 1)) <= rem:
                    p += 1
                advanced = False
                while True:
                    trial = r_pows[p] @ work
                    if _norm2(trial) > r:
                        work = trial
                        steps_done += 1 << p
                        advanced = True
                        break
                    if p == 0:
                        break
                    p -= 1
                if advanced:
                    continue
                # crossing lies inside the next elementary step; resolve
                # jumps within it (possibly several) by bisecting the
                # polynomial flow phi(tau) applied to the current state
                step_base = stride_start + steps_done * dt
                t_in_step = 0.0
                while True:
                    frac = dt - t_in_step
                    v1 = gen @ work
                    v2 = gen @ v1
                    v3 = gen @ v2
                    v4 = gen @ v3
                    cand2 = work + frac * (v1 + (frac / 2.0) *
                                           (v2 + (frac / 3.0) *
                                            (v3 + (frac / 4.0) * v4)))
                    if _norm2(cand2) > r:
                        work = cand2
                        break
                    lo = 0.0
                    hi = frac
                    while hi - lo > bisect_tol:
                        mid = 0.5 * (lo + hi)
                        phi = work + mid * (v1 + (mid / 2.0) *
                                            (v2 + (mid / 3.0) *
                                             (v3 + (mid / 4.0) * v4)))
                        if _norm2(phi) > r:
                            lo = mid
                        else:
                            hi = mid
                    tau = 0.5 * (lo + hi)
                    phi = work + tau * (v1 + (tau / 2.0) *
                                        (v2 + (tau / 3.0) *
                                         (v3 + (tau / 4.0) * v4)))
                    # select the jump channel proportionally to ||L phi||^2
                    total = 0.0
                    for c in range(n_chan):
                        jumped = collapse[c] @ phi
                        w = _norm2(jumped)
                        weights[c] = w
                        total += w
                    if used + 2 > uniforms.shape[0]:
                        return n_jumps, used, STATUS_BUFFER_EXHAUSTED
                    x = uniforms[used] * total
                    used += 1
                    chan = n_chan - 1
                    acc = 0.0
                    for c in range(n_chan):
                        acc += weights[c]
                        if x < acc:
                            chan = c
                            break
                    if n_jumps >= max_jumps:
                        return n_jumps, used, STATUS_BUFFER_EXHAUSTED
                    after = collapse[chan] @ phi
                    inv = 1.0 / np.sqrt(_norm2(after))
                    work = after * inv
                    jump_times[n_jumps] = step_base + t_in_step + tau
                    jump_channels[n_jumps] = chan
                    n_jumps += 1
                    r = uniforms[used]
                    used += 1
                    if r <= 0.0:
                        r = 1e-300
                    t_in_step += tau
                steps_done += 1
        inv = 1.0 / np.sqrt(_norm2(work))
        for i in range(d):
            states[s, i] = work[i] * inv
    return n_jumps, used, STATUS_OK


if BACKEND == "numba":
    _norm2 = numba.njit(cache=True, nogil=True)(_norm2_impl)
    trajectory_kernel = numba.njit(cache=True, nogil=True)(_kernel_impl)
else:
    _norm2 = _norm2_impl
    trajectory_kernel = _kernel_impl
