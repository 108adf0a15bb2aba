"""Joint controllers: the coupled CPG network and the uncoupled sine brain.

Each CPG node is a pair of neurons with state ``(x, y)``:

    dx_i/dt =  w_i * y_i + sum_j c_ji * x_j
    dy_i/dt = -w_i * x_i

The y->x weight is always ``-w_i``.  Every connection between two nodes has a
single parameter ``c``; it drives the higher-indexed node with ``+c`` and the
lower-indexed one with ``-c`` so the whole system stays antisymmetric and
bounded.  Joint output is ``x`` clamped to [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from heritevo.morphology import Cell, GridEmbedding, Path

DEFAULT_DT = 0.005
NEIGHBOUR_DISTANCE = 3

FREQUENCY_RANGE = (0.1, 2.0)
OFFSET_RANGE = (-1.0, 1.0)
AMPLITUDE_RANGE = (0.0, 1.0)
PARAM_RANGES = (FREQUENCY_RANGE, OFFSET_RANGE, AMPLITUDE_RANGE)


def manhattan(a: Cell, b: Cell) -> int:
    return sum(abs(p - q) for p, q in zip(a, b))


@dataclass
class CpgNetwork:
    joints: list[Path]
    cells: list[Cell]
    edges: list[tuple[int, int]]
    weights: np.ndarray | None = None
    couplings: np.ndarray | None = None
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.reset()

    def reset(self) -> None:
        state = np.zeros((len(self.joints), 2))
        state[:, 1] = 1.0
        self.state = state

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def parameter_count(self) -> int:
        return len(self.joints) + len(self.edges)

    @property
    def y_to_x(self) -> np.ndarray:
        return -self.weights

    @property
    def output_weight(self) -> float:
        return 1.0

    def set_weights(self, weights, couplings) -> None:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        couplings = np.asarray(couplings, dtype=float).reshape(-1)
        if len(weights) != self.n_joints or len(couplings) != len(self.edges):
            raise ValueError("weight vector sizes do not match the topology")
        self.weights = weights
        self.couplings = couplings

    def coupling_matrix(self) -> np.ndarray:
        k = np.zeros((self.n_joints, self.n_joints))
        for (i, j), c in zip(self.edges, self.couplings):
            k[j, i] = c
            k[i, j] = -c
        return k

    def system_matrix(self) -> np.ndarray:
        """Linear map of the stacked state ``[x; y]`` to its derivative."""
        if self.weights is None:
            raise ValueError("CPG weights are unset")
        n = self.n_joints
        a = np.zeros((2 * n, 2 * n))
        w = np.diag(self.weights)
        a[:n, :n] = self.coupling_matrix()
        a[:n, n:] = w
        a[n:, :n] = -w
        return a

    def outputs(self) -> np.ndarray:
        return np.clip(self.state[:, 0], -1.0, 1.0)

    def output_series(self, n_steps: int, dt: float = DEFAULT_DT) -> np.ndarray:
        """Outputs at steps 0..n_steps from the current state (state is left untouched).

        For a linear system one RK4 step is the matrix polynomial below, so
        the loop is a plain mat-vec.
        """
        n = self.n_joints
        out = np.zeros((n_steps + 1, n))
        if n == 0:
            return out
        ha = dt * self.system_matrix()
        eye = np.eye(2 * n)
        h2 = ha @ ha
        h3 = h2 @ ha
        step = eye + ha + h2 / 2.0 + h3 / 6.0 + (h3 @ ha) / 24.0
        s = np.concatenate([self.state[:, 0], self.state[:, 1]])
        out[0] = s[:n]
        for k in range(1, n_steps + 1):
            s = step @ s
            out[k] = s[:n]
        return np.clip(out, -1.0, 1.0)


def build_cpg_topology(e: GridEmbedding, max_distance: int = NEIGHBOUR_DISTANCE) -> CpgNetwork:
    joints = e.joints()
    cells = [e.placement[p] for p in joints]
    edges = [
        (i, j)
        for i in range(len(joints))
        for j in range(i + 1, len(joints))
        if manhattan(cells[i], cells[j]) <= max_distance
    ]
    return CpgNetwork(joints, cells, edges)


def _derivative(net: CpgNetwork, state: np.ndarray) -> np.ndarray:
    x, y = state[:, 0], state[:, 1]
    dx = net.weights * y + net.coupling_matrix() @ x
    dy = -net.weights * x
    return np.stack([dx, dy], axis=1)


def step_cpg(net: CpgNetwork, dt: float = DEFAULT_DT) -> np.ndarray:
    """Advance the network one explicit RK4 step in place and return joint outputs."""
    if net.weights is None:
        raise ValueError("CPG weights are unset")
    s = net.state
    k1 = _derivative(net, s)
    k2 = _derivative(net, s + 0.5 * dt * k1)
    k3 = _derivative(net, s + 0.5 * dt * k2)
    k4 = _derivative(net, s + dt * k3)
    net.state = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return net.outputs()


@dataclass
class SineOscillatorBrain:
    """Independent per-joint oscillators; ``params`` rows are (frequency, offset, amplitude)."""

    joints: list[Path]
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).reshape(-1, 3)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def output_series(self, n_steps: int, dt: float = DEFAULT_DT) -> np.ndarray:
        t = np.arange(n_steps + 1) * dt
        return eval_sine_brain(self, t[:, None])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SineOscillatorBrain):
            return NotImplemented
        return self.joints == other.joints and np.array_equal(self.params, other.params)


def eval_sine_brain(brain: SineOscillatorBrain, t) -> np.ndarray:
    f, off, amp = brain.params[:, 0], brain.params[:, 1], brain.params[:, 2]
    return np.clip(off + amp * np.sin(2.0 * np.pi * f * np.asarray(t, dtype=float)), -1.0, 1.0)
