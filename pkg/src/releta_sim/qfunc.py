"""Q-value approximator: a small three-layer network (input -> hidden ->
one output per action), TD-target construction, squared-TD loss and plain
stochastic-gradient updates.

The forward pass and gradients are written out directly; the architecture
is fixed, so nothing heavier than numpy is needed. The allocator default is
input 2n -> hidden 2n -> output n with identity activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ValidationError

ACTIVATIONS = ("identity", "rectifier")


@dataclass(eq=False)
class QNetwork:
    """Weights and biases of the approximator, one output per action."""

    w1: np.ndarray  # hidden x in
    b1: np.ndarray  # hidden
    w2: np.ndarray  # out x hidden
    b2: np.ndarray  # out
    activation: str = "identity"

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        hidden, n_in = self.w1.shape
        if self.b1.shape != (hidden,):
            raise ValidationError("b1", f"expected shape ({hidden},)")
        if self.w2.ndim != 2 or self.w2.shape[1] != hidden:
            raise ValidationError("w2", f"expected shape (out, {hidden})")
        if self.b2.shape != (self.w2.shape[0],):
            raise ValidationError("b2", f"expected shape ({self.w2.shape[0]},)")
        if self.activation not in ACTIVATIONS:
            raise ValidationError("activation", f"must be one of {ACTIVATIONS}")
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(name, "parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_actions(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "QNetwork":
        return QNetwork(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(), self.activation
        )

    @classmethod
    def initialized(
        cls,
        in_dim: int,
        hidden_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        activation: str = "identity",
    ) -> "QNetwork":
        """Weights uniform in [-0.1, 0.1], biases zero."""
        return cls(
            w1=rng.uniform(-0.1, 0.1, size=(hidden_dim, in_dim)),
            b1=np.zeros(hidden_dim),
            w2=rng.uniform(-0.1, 0.1, size=(out_dim, hidden_dim)),
            b2=np.zeros(out_dim),
            activation=activation,
        )

    @classmethod
    def for_cores(
        cls, n: int, rng: np.random.Generator, activation: str = "identity"
    ) -> "QNetwork":
        """Allocator shape: state of 2n entries, hidden layer of 2n neurons,
        one Q-value per core."""
        return cls.initialized(2 * n, 2 * n, n, rng, activation)


@dataclass
class Hyperparams:
    """Learning-rate, discount and epsilon schedule.

    Epsilon decays linearly from eps_start to eps_end over eps_decay_steps
    decisions and stays at eps_end afterward.
    """

    alpha: float = 0.8
    gamma: float = 0.9
    eps_start: float = 0.1
    eps_end: float = 0.03
    eps_decay_steps: int = 500

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError("alpha", "must be > 0")
        if not 0 <= self.gamma <= 1:
            raise ValidationError("gamma", "must be in [0, 1]")
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValidationError("eps_start/eps_end", "need 0 <= eps_end <= eps_start <= 1")
        if self.eps_decay_steps < 0:
            raise ValidationError("eps_decay_steps", "must be >= 0")


@dataclass
class Transition:
    """One replay-buffer element."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float)
        self.next_state = np.asarray(self.next_state, dtype=float)
        if self.action < 0:
            raise ValidationError("action", "must be >= 0")


def _hidden(net: QNetwork, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z1 = net.w1 @ state + net.b1
    if net.activation == "rectifier":
        return z1, np.maximum(z1, 0.0)
    return z1, z1


def forward(net: QNetwork, state: np.ndarray) -> np.ndarray:
    """Q-values for every action at ``state``."""
    state = np.asarray(state, dtype=float)
    if state.shape != (net.in_dim,):
        raise ValidationError("state", f"expected shape ({net.in_dim},), got {state.shape}")
    if not np.all(np.isfinite(state)):
        raise ValidationError("state", "entries must be finite")
    _, h = _hidden(net, state)
    return net.w2 @ h + net.b2


def td_target(reward: float, next_q: np.ndarray, gamma: float, terminal: bool) -> float:
    """Regression target: reward, plus gamma * max next-Q when non-terminal."""
    if terminal:
        return float(reward)
    next_q = np.asarray(next_q, dtype=float)
    if not np.all(np.isfinite(next_q)):
        raise ValidationError("next_q", "entries must be finite")
    return float(reward + gamma * np.max(next_q))


def loss_gradients(
    net: QNetwork, state: np.ndarray, action: int, target: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Squared-TD loss (target - Q(state, action))**2 and its gradients.

    Only parameters on the chosen action's path get non-zero gradients: the
    full first layer plus row ``action`` of the output layer.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (net.in_dim,):
        raise ValidationError("state", f"expected shape ({net.in_dim},), got {state.shape}")
    if not 0 <= action < net.n_actions:
        raise ValidationError("action", f"must be in [0, {net.n_actions}), got {action}")
    z1, h = _hidden(net, state)
    q_a = float(net.w2[action] @ h + net.b2[action])
    err = target - q_a
    loss = err * err
    # dL/dq_a = -2 err; chain through the chosen output row only.
    coeff = -2.0 * err
    grad_w2 = np.zeros_like(net.w2)
    grad_b2 = np.zeros_like(net.b2)
    grad_w2[action] = coeff * h
    grad_b2[action] = coeff
    dz1 = net.w2[action].copy()
    if net.activation == "rectifier":
        dz1 = dz1 * (z1 > 0)
    grad_w1 = coeff * np.outer(dz1, state)
    grad_b1 = coeff * dz1
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def sgd_update(
    net: QNetwork, state: np.ndarray, action: int, target: float, alpha: float
) -> float:
    """One gradient step toward ``target`` on the chosen action's Q-value.

    Updates the network in place and returns the pre-update squared error.
    Raises DivergenceError when a gradient or an updated parameter is
    non-finite (training has diverged).
    """
    if not np.isfinite(target):
        raise ValidationError("target", "must be finite")
    loss, grads = loss_gradients(net, state, action, target)
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite gradient for {name}")
        param = getattr(net, name)
        param -= alpha * grad
        if not np.all(np.isfinite(param)):
            raise DivergenceError(f"non-finite parameter {name} after update")
    return loss


def argmax_action(q: np.ndarray) -> int:
    """Index of the maximum Q-value; ties break to the lowest index."""
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise ValidationError("q", "must be non-empty")
    if not np.all(np.isfinite(q)):
        raise ValidationError("q", "entries must be finite")
    return int(np.argmax(q))


def epsilon_at(step: int, h: Hyperparams) -> float:
    """Exploration probability after ``step`` decisions."""
    if step < 0:
        raise ValidationError("step", "must be >= 0")
    if h.eps_decay_steps <= 0 or step >= h.eps_decay_steps:
        return h.eps_end
    frac = step / h.eps_decay_steps
    return h.eps_start + (h.eps_end - h.eps_start) * frac


def checkpoint_text(net: QNetwork) -> str:
    """Plain-text checkpoint: header with dims and activation, then
    row-major parameters at 17 significant digits (exact float round-trip)."""
    lines = [
        "qnet 1",
        f"dims {net.in_dim} {net.hidden_dim} {net.n_actions}",
        f"activation {net.activation}",
    ]
    for name in ("w1", "b1", "w2", "b2"):
        lines.append(name)
        arr = np.atleast_2d(getattr(net, name))
        for row in arr:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> QNetwork:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["qnet", "1"]:
        raise ValidationError("checkpoint", "missing 'qnet 1' header")
    dims = lines[1].split()
    if len(dims) != 4 or dims[0] != "dims":
        raise ValidationError("checkpoint", "malformed dims line")
    in_dim, hidden, out = (int(v) for v in dims[1:])
    act_line = lines[2].split()
    if len(act_line) != 2 or act_line[0] != "activation":
        raise ValidationError("checkpoint", "malformed activation line")
    activation = act_line[1]
    shapes = {"w1": (hidden, in_dim), "b1": (1, hidden), "w2": (out, hidden), "b2": (1, out)}
    arrays: dict[str, np.ndarray] = {}
    pos = 3
    for name, shape in shapes.items():
        if pos >= len(lines) or lines[pos] != name:
            raise ValidationError("checkpoint", f"expected section {name!r}")
        pos += 1
        rows = []
        for _ in range(shape[0]):
            values = [float(v) for v in lines[pos].split()]
            if len(values) != shape[1]:
                raise ValidationError("checkpoint", f"bad row width in section {name!r}")
            rows.append(values)
            pos += 1
        arrays[name] = np.array(rows)
    return QNetwork(
        w1=arrays["w1"],
        b1=arrays["b1"][0],
        w2=arrays["w2"],
        b2=arrays["b2"][0],
        activation=activation,
    )


def save_checkpoint(net: QNetwork, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(checkpoint_text(net))


def load_checkpoint(path: str) -> QNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_checkpoint(fh.read())
