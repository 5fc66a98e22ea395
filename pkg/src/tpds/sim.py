"""TPDS simulation, experiment generation, and cost evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor_core import Tensor3, tprod
from .informativity import ExperimentData

__all__ = [
    "Trajectory",
    "evaluate_cost",
    "generate_experiment",
    "simulate",
]

INPUT_LAWS = ("uniform", "integers")
DIVERGENCE_NORM = 1e12


@dataclass
class Trajectory:
    """States 0..l and inputs 0..l-1 of one rollout.

    ``truncated`` flags a rollout cut short because the state stopped
    being finite (unstable open loop)."""

    states: list[Tensor3]
    inputs: list[Tensor3]
    truncated: bool = False

    @property
    def length(self) -> int:
        return len(self.inputs)


def simulate(
    a: Tensor3,
    b: Tensor3,
    x0: Tensor3,
    *,
    inputs: Optional[Sequence[Tensor3]] = None,
    gain: Optional[Tensor3] = None,
    steps: Optional[int] = None,
) -> Trajectory:
    """Roll out ``x(t+1) = a*x(t) + b*u(t)``.

    Exactly one input source: an explicit sequence (open loop) or a gain
    tensor for the feedback law ``u(t) = -gain * x(t)`` (closed loop, in
    which case ``steps`` is required).  Non-finite states truncate the
    trajectory and set the ``truncated`` flag.
    """
    if a.n != a.m or a.n != b.n or a.r != b.r:
        raise ValueError(f"incompatible system dims {a.dims} / {b.dims}")
    if x0.n != a.n or x0.r != a.r:
        raise ValueError(f"initial state dims {x0.dims} do not match the system")
    if (inputs is None) == (gain is None):
        raise ValueError("provide exactly one of inputs= or gain=")
    if gain is not None:
        if steps is None:
            raise ValueError("closed-loop simulation needs steps=")
        if gain.n != b.m or gain.m != a.n or gain.r != a.r:
            raise ValueError(f"gain dims {gain.dims} do not fit the system")
        length = steps
    else:
        length = len(inputs) if steps is None else min(steps, len(inputs))

    states = [x0]
    used: list[Tensor3] = []
    x = x0
    for t in range(length):
        if gain is not None:
            u = Tensor3(-tprod(gain, x).data)
        else:
            u = inputs[t]
            if u.n != b.m or u.m != x0.m or u.r != a.r:
                raise ValueError(f"input {t} dims {u.dims} do not fit the system")
        x_next = Tensor3(tprod(a, x).data + tprod(b, u).data)
        if not np.all(np.isfinite(x_next.data)):
            return Trajectory(states=states, inputs=used, truncated=True)
        used.append(u)
        states.append(x_next)
        x = x_next
    return Trajectory(states=states, inputs=used)


def generate_experiment(
    a: Tensor3,
    b: Tensor3,
    l: int,
    h: int,
    seed: int,
    input_law: str = "uniform",
) -> ExperimentData:
    """Record an open-loop experiment of ``l`` steps with ``h`` lateral
    state columns.

    ``input_law`` is ``"uniform"`` (iid uniform on [-1, 1]) or
    ``"integers"`` (iid integers in {-2..2}); the initial state follows
    the same law.  Deterministic given the seed.
    """
    if l < 1:
        raise ValueError("need at least one step")
    if input_law not in INPUT_LAWS:
        raise ValueError(f"unknown input law {input_law!r}; choose from {INPUT_LAWS}")
    rng = np.random.default_rng(seed)

    def draw(shape):
        if input_law == "integers":
            return rng.integers(-2, 3, size=shape).astype(float)
        return rng.uniform(-1.0, 1.0, size=shape)

    n, m, r = a.n, b.m, a.r
    x0 = Tensor3(draw((r, n, h)))
    us = [Tensor3(draw((r, m, h))) for _ in range(l)]
    traj = simulate(a, b, x0, inputs=us)
    if traj.truncated:
        raise RuntimeError("open-loop experiment diverged to non-finite states")
    y = Tensor3(np.concatenate([s.data for s in traj.states[:-1]], axis=2))
    z = Tensor3(np.concatenate([s.data for s in traj.states[1:]], axis=2))
    v = Tensor3(np.concatenate([u.data for u in traj.inputs], axis=2))
    return ExperimentData(v=v, y=y, z=z, l=l, h=h)


def evaluate_cost(
    traj: Trajectory,
    q: Tensor3,
    rr: Tensor3,
    *,
    split: bool = False,
):
    """Accumulated T-quadratic cost of a trajectory.

    Each summand ``x(t)^T * q * x(t) + u(t)^T * rr * u(t)`` is an
    ``h x h x r`` tensor; the scalar reported is the trace of the
    block-circulant unfolding of the accumulated tensor divided by r --
    equivalently the trace of its first frontal slice, and also the
    average of the per-Fourier-block quadratic-form traces.  This equals
    the standard quadratic cost of the unfolded linear system averaged
    over the circulant copies and is invariant to the DFT normalization.

    Accumulation truncates once a step adds less than ``1e-14`` of the
    running total; it reports ``inf`` if increments grow for 10
    consecutive steps or the state norm exceeds 1e12 (diverged closed
    loop).

    With ``split=True`` returns ``(state_cost, input_cost)``.
    """
    qb = np.fft.fft(q.data, axis=0)
    rb = np.fft.fft(rr.data, axis=0)
    r = q.r
    state_cost = 0.0
    input_cost = 0.0
    growing = 0
    prev_inc = np.inf
    for x, u in zip(traj.states, traj.inputs):
        if float(np.linalg.norm(x.data)) > DIVERGENCE_NORM:
            return (np.inf, np.inf) if split else np.inf
        xb = np.fft.fft(x.data, axis=0)
        ub = np.fft.fft(u.data, axis=0)
        inc_x = sum(float(np.einsum("ij,ik,kj->", xb[k].conj(), qb[k], xb[k]).real)
                    for k in range(r)) / r
        inc_u = sum(float(np.einsum("ij,ik,kj->", ub[k].conj(), rb[k], ub[k]).real)
                    for k in range(r)) / r
        inc = inc_x + inc_u
        if inc > prev_inc * (1.0 + 1e-12):
            growing += 1
            if growing >= 10:
                return (np.inf, np.inf) if split else np.inf
        else:
            growing = 0
        prev_inc = inc
        state_cost += inc_x
        input_cost += inc_u
        if inc < 1e-14 * (state_cost + input_cost):
            break
    return (state_cost, input_cost) if split else state_cost + input_cost
