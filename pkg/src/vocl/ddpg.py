"""Adaptive loss weighting via three independent DDPG agents.

One agent per loss component (flow, pose, rotation).  Each observes
[training progress, its component loss], emits an action in [0, 1] that
interpolates the curriculum weight between its bounds, and learns off-policy
from a replay buffer with reward equal to the negative absolute loss that
followed the action.

The actor/critic networks are small fixed-depth MLPs with hand-written
forward and backward passes; no autodiff framework sits underneath, so every
gradient here is checkable against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .curriculum import CurriculumWeights, LossBreakdown, Scheduler, WeightBounds
from .errors import NonFiniteGradient, Underfull


@dataclass(frozen=True)
class AgentState:
    """What an agent sees: progress p in [0, 1] and its component loss."""

    p: float
    loss: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.p, self.loss])


@dataclass(frozen=True)
class Transition:
    state: AgentState
    action: float
    reward: float
    next_state: AgentState


@dataclass
class MlpParams:
    """Three weight layers: input -> hidden -> hidden -> output.

    weights[i] has shape (fan_out, fan_in); biases[i] has shape (fan_out,).
    """

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("expected exactly three weight layers")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight rows {w.shape} vs bias {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: fan-in does not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    @staticmethod
    def init(sizes, rng, last_layer_scale=1e-3) -> "MlpParams":
        """Fan-in scaled uniform init; tiny final layer so actions start mid-range."""
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            s = last_layer_scale if i == len(sizes) - 2 else 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-s, s, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return MlpParams(weights, biases)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _net_forward(params: MlpParams, x: np.ndarray):
    """Linear output head; returns (out, cache) with x shaped (batch, n_in)."""
    z1 = x @ params.weights[0].T + params.biases[0]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.weights[1].T + params.biases[1]
    h2 = np.maximum(z2, 0.0)
    out = h2 @ params.weights[2].T + params.biases[2]
    return out, (x, z1, h1, z2, h2)


def _net_backward(params: MlpParams, cache, grad_out: np.ndarray):
    """Backprop grad_out (batch, n_out) to parameter grads and input grad.

    Grads come back as a plain ([weight grads], [bias grads]) pair, not an
    MlpParams, so non-finite values survive to the caller's finiteness check.
    """
    x, z1, h1, z2, h2 = cache
    gw3 = grad_out.T @ h2
    gb3 = grad_out.sum(axis=0)
    gh2 = grad_out @ params.weights[2]
    gz2 = gh2 * (z2 > 0)
    gw2 = gz2.T @ h1
    gb2 = gz2.sum(axis=0)
    gh1 = gz2 @ params.weights[1]
    gz1 = gh1 * (z1 > 0)
    gw1 = gz1.T @ x
    gb1 = gz1.sum(axis=0)
    gx = gz1 @ params.weights[0]
    return ([gw1, gw2, gw3], [gb1, gb2, gb3]), gx


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def actor_forward(params: MlpParams, state: AgentState) -> float:
    """Deterministic policy: logistic-squashed MLP output in [0, 1]."""
    out, _ = _net_forward(params, state.as_vector()[None, :])
    return float(_sigmoid(out)[0, 0])


def actor_forward_batch(params: MlpParams, states: np.ndarray):
    out, cache = _net_forward(params, states)
    return _sigmoid(out), cache


def critic_forward(params: MlpParams, state: AgentState, action: float) -> float:
    """Q estimate for (state, action); action joins the input layer."""
    x = np.array([[state.p, state.loss, action]])
    out, _ = _net_forward(params, x)
    return float(out[0, 0])


def critic_forward_batch(params: MlpParams, states: np.ndarray, actions: np.ndarray):
    x = np.concatenate([states, actions], axis=1)
    out, cache = _net_forward(params, x)
    return out, cache


def exploration_noise(action: float, scale: float, rng) -> float:
    """Gaussian jitter with std scale * 2 * min(a, 1-a), clipped to [0, 1].

    The std collapses at the boundaries, so saturated actions stay put.
    """
    std = scale * 2.0 * min(action, 1.0 - action)
    return float(np.clip(action + rng.normal(0.0, 1.0) * std, 0.0, 1.0))


def adaptive_weight(action: float, bounds: WeightBounds = WeightBounds()) -> float:
    """Linear interpolation w_0 + (w_F - w_0) * a."""
    return bounds.w_0 + (bounds.w_F - bounds.w_0) * action


def build_state(step: int, budget: int, loss: float) -> AgentState:
    """Pair clamped progress min(step/budget, 1) with the component loss."""
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return AgentState(min(step / budget, 1.0), loss)


def reward(loss: float) -> float:
    """Negative absolute loss; the agent maximizes by driving loss down."""
    return -abs(loss)


class ReplayBuffer:
    """Fixed-capacity FIFO ring over scalar transitions."""

    FIELDS = 6  # p, loss, action, reward, next p, next loss

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._rows = np.zeros((capacity, self.FIELDS))
        self.count = 0

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def push(self, t: Transition):
        self._rows[self.count % self.capacity] = (
            t.state.p,
            t.state.loss,
            t.action,
            t.reward,
            t.next_state.p,
            t.next_state.loss,
        )
        self.count += 1

    def _transition(self, row) -> Transition:
        return Transition(
            AgentState(row[0], row[1]), row[2], row[3], AgentState(row[4], row[5])
        )

    def sample(self, batch: int, rng) -> list:
        if len(self) < batch:
            raise Underfull(f"buffer holds {len(self)} < batch {batch}")
        idx = rng.choice(len(self), size=batch, replace=False)
        return [self._transition(self._rows[i]) for i in idx]

    def snapshot(self) -> list:
        """All stored transitions, oldest first (test hook)."""
        n = len(self)
        if self.count <= self.capacity:
            order = range(n)
        else:
            start = self.count % self.capacity
            order = [(start + i) % self.capacity for i in range(n)]
        return [self._transition(self._rows[i]) for i in order]


def buffer_push(buf: ReplayBuffer, t: Transition):
    buf.push(t)


def buffer_sample(buf: ReplayBuffer, batch: int, rng) -> list:
    return buf.sample(batch, rng)


@dataclass(frozen=True)
class AgentHyperparams:
    gamma: float = 0.95
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    noise_scale: float = 0.1
    update_every: int = 50
    update_iters: int = 10
    batch_size: int = 64
    hidden: tuple = (64, 64)
    buffer_capacity: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("step sizes must be positive")
        if max(self.hidden) > 64:
            raise ValueError(f"hidden widths capped at 64, got {self.hidden}")


class DdpgAgent:
    """One component's weight controller: actor/critic pair plus targets.

    All randomness (init, exploration, batch sampling) flows through the
    generator handed in, so a fixed seed reproduces the agent bit for bit.
    """

    def __init__(self, name: str, hyper: AgentHyperparams, rng):
        self.name = name
        self.hyper = hyper
        self.rng = rng
        h1, h2 = hyper.hidden
        self.actor = MlpParams.init((2, h1, h2, 1), rng)
        self.critic = MlpParams.init((3, h1, h2, 1), rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.buffer = ReplayBuffer(hyper.buffer_capacity)
        self.pending: tuple[AgentState, float] | None = None
        self.skipped_updates = 0
        self.update_rounds = 0
        self.update_iterations = 0

    def act(self, state: AgentState) -> float:
        """Noisy policy action for training-time exploration."""
        return exploration_noise(actor_forward(self.actor, state), self.hyper.noise_scale, self.rng)

    def complete_transition(self, new_state: AgentState):
        """Close the pending (state, action) with the loss that followed it."""
        if self.pending is not None:
            s, a = self.pending
            self.buffer.push(Transition(s, a, reward(new_state.loss), new_state))
        self.pending = None

    def update_round(self):
        """One cadence window: update_iters sampled updates, skip-safe."""
        self.update_rounds += 1
        for _ in range(self.hyper.update_iters):
            try:
                batch = self.buffer.sample(self.hyper.batch_size, self.rng)
            except Underfull:
                return
            try:
                ddpg_update(self, batch)
            except NonFiniteGradient:
                self.skipped_updates += 1
                continue
            self.update_iterations += 1


def _check_finite(*grad_pairs):
    for gw, gb in grad_pairs:
        for arr in (*gw, *gb):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteGradient("non-finite gradient component; update skipped")


def _sgd_step(params: MlpParams, grads, lr: float):
    gw, gb = grads
    for w, g in zip(params.weights, gw):
        w -= lr * g
    for b, g in zip(params.biases, gb):
        b -= lr * g


def _soft_update(target: MlpParams, online: MlpParams, tau: float):
    for t, o in zip(target.weights, online.weights):
        t += tau * (o - t)
    for t, o in zip(target.biases, online.biases):
        t += tau * (o - t)


def critic_loss_and_grads(params: MlpParams, states, actions, targets):
    """Squared Bellman residual mean((Q - y)^2) and its parameter gradients."""
    q, cache = critic_forward_batch(params, states, actions)
    residual = q[:, 0] - targets
    loss = float((residual * residual).mean())
    grads, _ = _net_backward(params, cache, (2.0 / len(targets)) * residual[:, None])
    return loss, grads


def actor_objective_and_grads(actor: MlpParams, critic: MlpParams, states):
    """Policy objective -mean Q(s, mu(s)) and its actor-parameter gradients."""
    n = states.shape[0]
    a, actor_cache = actor_forward_batch(actor, states)
    q, q_cache = critic_forward_batch(critic, states, a)
    objective = float(-q.mean())
    _, dq_dinput = _net_backward(critic, q_cache, np.full((n, 1), -1.0 / n))
    squashed = dq_dinput[:, 2:3] * (a * (1.0 - a))
    grads, _ = _net_backward(actor, actor_cache, squashed)
    return objective, grads


def actor_input_gradient(params: MlpParams, state: AgentState) -> np.ndarray:
    """d action / d state, shape (2,)."""
    a, cache = actor_forward_batch(params, state.as_vector()[None, :])
    _, gx = _net_backward(params, cache, a * (1.0 - a))
    return gx[0]


def critic_input_gradient(params: MlpParams, state: AgentState, action: float) -> np.ndarray:
    """d Q / d (p, loss, action), shape (3,)."""
    x = np.array([[state.p, state.loss, action]])
    _, cache = _net_forward(params, x)
    _, gx = _net_backward(params, cache, np.ones((1, 1)))
    return gx[0]


def ddpg_update(agent: DdpgAgent, batch: list):
    """One gradient step on critic and actor, then soft target updates.

    Critic regresses Q(s, a) onto r + gamma * Q'(s', mu'(s')); the actor
    follows the deterministic policy gradient.  Both gradient sets come from
    the pre-step parameters and are checked for finiteness before either
    step applies, so a bad batch leaves the agent untouched.
    """
    hyper = agent.hyper
    states = np.stack([t.state.as_vector() for t in batch])
    actions = np.array([[t.action] for t in batch])
    rewards = np.array([t.reward for t in batch])
    next_states = np.stack([t.next_state.as_vector() for t in batch])

    # non-finite values are allowed to propagate silently here; the explicit
    # finiteness gate below decides whether the step happens
    with np.errstate(over="ignore", invalid="ignore"):
        next_actions, _ = actor_forward_batch(agent.actor_target, next_states)
        next_q, _ = critic_forward_batch(agent.critic_target, next_states, next_actions)
        targets = rewards + hyper.gamma * next_q[:, 0]

        _, critic_grads = critic_loss_and_grads(agent.critic, states, actions, targets)
        _, actor_grads = actor_objective_and_grads(agent.actor, agent.critic, states)

    _check_finite(critic_grads, actor_grads)
    _sgd_step(agent.critic, critic_grads, hyper.critic_lr)
    _sgd_step(agent.actor, actor_grads, hyper.actor_lr)
    _soft_update(agent.critic_target, agent.critic, hyper.tau)
    _soft_update(agent.actor_target, agent.actor, hyper.tau)


def component_losses(
    breakdown: LossBreakdown, weights: CurriculumWeights, pose_input: str = "subtotal"
):
    """Split a breakdown into the three agents' loss signals.

    The pose agent reads either the weighted subtotal translation +
    w_r * rotation (default) or the translation part alone.
    """
    if pose_input == "subtotal":
        pose = breakdown.translation + weights.w_r * breakdown.rotation
    elif pose_input == "translation":
        pose = breakdown.translation
    else:
        raise ValueError(f"unknown pose_input {pose_input!r}")
    return breakdown.flow, pose, breakdown.rotation


def scheduler_step(
    agents,
    step: int,
    budget: int,
    losses,
    bounds: WeightBounds = WeightBounds(),
) -> CurriculumWeights:
    """Advance all three agents one step and emit the weights to train with.

    losses holds the previous step's (flow, pose, rotation) component losses
    (zeros before the first step).  Each agent closes its pending transition
    with those, acts on the fresh state, and — on cadence steps — runs its
    update round.
    """
    values = []
    update_due = step > 0 and step % agents[0].hyper.update_every == 0
    for agent, loss in zip(agents, losses):
        state = build_state(step, budget, loss)
        agent.complete_transition(state)
        action = agent.act(state)
        agent.pending = (state, action)
        if update_due:
            agent.update_round()
        values.append(adaptive_weight(action, bounds))
    return CurriculumWeights(*values)


class DdpgScheduler:
    """Scheduler-protocol wrapper around the three agents."""

    mode = "ddpg"

    def __init__(
        self,
        budget: int,
        hyper: AgentHyperparams = AgentHyperparams(),
        bounds: WeightBounds = WeightBounds(),
        pose_input: str = "subtotal",
        seed: int = 0,
    ):
        self._base = Scheduler(budget)
        self.state = self._base.state
        self.bounds = bounds
        self.pose_input = pose_input
        seq = np.random.SeedSequence(seed)
        self.agents = tuple(
            DdpgAgent(name, hyper, np.random.Generator(np.random.PCG64(child)))
            for name, child in zip(("flow", "pose", "rotation"), seq.spawn(3))
        )
        self._last_losses = (0.0, 0.0, 0.0)

    def begin_step(self, step: int):
        self.state.step = step
        self.state.weights = scheduler_step(
            self.agents, step, self.state.budget, self._last_losses, self.bounds
        )
        return self.state.weights, self.state.active_levels

    def end_step(self, step: int, breakdown: LossBreakdown):
        self._base.end_step(step, breakdown)
        self._last_losses = component_losses(breakdown, self.state.weights, self.pose_input)

    def on_validation(self, step: int, val_ate: float, val_auc: float):
        pass


def save_agents(path, agents):
    """Parameter-only checkpoint (buffers excluded), stable key order."""
    doc = {"format_version": 1, "kind": "ddpg_agents", "agents": {}}
    for agent in agents:
        nets = {}
        for name, params in (
            ("actor", agent.actor),
            ("critic", agent.critic),
            ("actor_target", agent.actor_target),
            ("critic_target", agent.critic_target),
        ):
            nets[name] = {
                "weights": [w.tolist() for w in params.weights],
                "biases": [b.tolist() for b in params.biases],
            }
        doc["agents"][agent.name] = {
            "nets": nets,
            "transitions_seen": agent.buffer.count,
            "skipped_updates": agent.skipped_updates,
            "update_iterations": agent.update_iterations,
        }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_agent_params(path) -> dict:
    """Checkpoint reader for inspection; returns the raw document."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get("kind") != "ddpg_agents":
        raise ValueError(f"{path} is not an agent checkpoint")
    return doc
