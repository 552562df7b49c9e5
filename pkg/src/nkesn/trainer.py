"""Training by neuron selection: episodes, landscape construction, ensemble deployment.

Training compiles a network into an :class:`~nkesn.landscape.NkLandscape`: every
output is scored on the double-pole task for every on/off pattern of its
``K+1`` probe inputs.  The solved selection vector then drives a
fitness-weighted ensemble of all outputs, which is scored on 625 start states.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import ExperimentConfig
from .dynamics import STANDARD_START, CartPoleState, PhysicsParams, SuccessDomain
from .landscape import NkLandscape, Solution, SolverKind, pattern, solve
from .network import EchoNetwork, NetworkConfig, build_network

log = logging.getLogger(__name__)

GENERALIZATION_FRACTIONS = (0.05, 0.25, 0.50, 0.75, 0.95)
# half-widths of the reduced start ranges: x_c (m), x_c_dot (m/s), theta1, theta1_dot
GENERALIZATION_RANGES = (2.14, 1.35, math.radians(3.6), math.radians(8.6))
GENERALIZATION_STEPS = 1000


class DegenerateEnsembleError(ValueError):
    """Ensemble weights cannot be normalized because all fitness values are zero."""


@dataclass(frozen=True)
class EpisodeSettings:
    t_max: int = 1000
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    domain: SuccessDomain = field(default_factory=SuccessDomain)
    steps_per_action: int = 1


@dataclass(frozen=True)
class FitnessComponents:
    steps_survived: int
    f1: float
    f_stable: float
    f: float

    @classmethod
    def from_episode(cls, steps: int, denominator: float, t_max: int) -> "FitnessComponents":
        steps = int(steps)
        f1 = min(steps, t_max) / t_max
        if steps < _kernels.STABLE_WINDOW:
            f_stable = 0.0
        else:
            f_stable = _kernels.STABLE_NUMERATOR / max(float(denominator), _kernels.STABLE_EPS)
        return cls(steps, f1, f_stable, 0.1 * f1 + 0.9 * f_stable)


@dataclass(frozen=True)
class EnsembleWeights:
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.a, dtype=np.float64)

    @property
    def support(self) -> tuple:
        return tuple(i for i, v in enumerate(self.a) if v != 0.0)

    @classmethod
    def one_hot(cls, n: int, i: int) -> "EnsembleWeights":
        a = [0.0] * n
        a[i] = 1.0
        return cls(tuple(a))


@dataclass(frozen=True)
class GeneralizationReport:
    successes: int
    per_state: tuple
    initial_states: tuple

    def bitstring(self) -> str:
        return "".join("1" if ok else "0" for ok in self.per_state)


class EpisodeCounter:
    """Counts episodes handed to the simulator."""

    def __init__(self):
        self.count = 0


def _controller_weights(controller, n: int) -> np.ndarray:
    if isinstance(controller, EnsembleWeights):
        weights = controller.array
    elif isinstance(controller, (int, np.integer)):
        weights = EnsembleWeights.one_hot(n, int(controller)).array
    else:
        weights = np.asarray(controller, dtype=np.float64)
    if weights.shape != (n,):
        raise ValueError(f"controller weights must have length {n}")
    return weights


def _bits(x, n: int) -> np.ndarray:
    bits = np.asarray(x, dtype=np.int8).ravel()
    if bits.shape != (n,):
        raise ValueError(f"bit vector must have length {n}, got {bits.size}")
    return bits


def run_episodes(network: EchoNetwork, bits, weights, starts,
                 settings: EpisodeSettings = EpisodeSettings(),
                 counter: EpisodeCounter | None = None):
    """Run a batch of independent episodes.

    Returns ``(steps, denominators, aborted)`` arrays, one entry per episode;
    ``aborted`` flags episodes cut short by a non-finite state.
    """
    bits = np.ascontiguousarray(bits, dtype=np.int8)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    n_ep = bits.shape[0]
    steps = np.zeros(n_ep, dtype=np.int64)
    denom = np.zeros(n_ep)
    aborted = np.zeros(n_ep, dtype=np.bool_)
    domain = settings.domain
    scale = np.array([domain.x_limit, domain.angle_limit, domain.angle_limit])
    if n_ep:
        _kernels.episode_batch(bits, weights, starts, settings.t_max, settings.steps_per_action,
                               domain.x_limit, domain.angle_limit,
                               settings.physics.kernel_vector(), *network.kernel_args(), scale,
                               steps, denom, aborted)
    if counter is not None:
        counter.count += n_ep
    return steps, denom, aborted


def run_episode(network: EchoNetwork, x, controller, start: CartPoleState = STANDARD_START,
                settings: EpisodeSettings = EpisodeSettings(),
                counter: EpisodeCounter | None = None) -> FitnessComponents:
    """Score one controller from ``start``; the reservoir starts from zero.

    ``controller`` is an output index (single output) or ensemble weights.
    """
    n = network.n_outputs
    steps, denom, _ = run_episodes(network, _bits(x, n)[None, :],
                                   _controller_weights(controller, n)[None, :],
                                   np.asarray(start, dtype=np.float64)[None, :], settings, counter)
    return FitnessComponents.from_episode(steps[0], denom[0], settings.t_max)


def pattern_vector(masks, i: int, p: int, n: int) -> np.ndarray:
    """Full-length selection vector with pattern ``p`` on row ``i``, zeros elsewhere."""
    x = np.zeros(n, dtype=np.int8)
    for j, q in enumerate(masks.rows[i]):
        x[q] = (p >> j) & 1
    return x


@dataclass
class LandscapeBuild:
    landscape: NkLandscape
    steps: np.ndarray
    episodes: int


def build_landscape(network: EchoNetwork, settings: EpisodeSettings = EpisodeSettings(),
                    start: CartPoleState = STANDARD_START,
                    counter: EpisodeCounter | None = None) -> LandscapeBuild:
    """Fill ``tables[i][p]`` with the fitness of output ``i`` under pattern ``p``.

    Exactly ``N * 2**(K+1)`` episodes, all from ``start``.
    """
    n, arity = network.n_outputs, network.masks.arity
    n_pat = 1 << arity
    bits = np.zeros((n * n_pat, n), dtype=np.int8)
    weights = np.zeros((n * n_pat, n))
    for i in range(n):
        for p in range(n_pat):
            e = i * n_pat + p
            bits[e] = pattern_vector(network.masks, i, p, n)
            weights[e, i] = 1.0
    starts = np.tile(np.asarray(start, dtype=np.float64), (n * n_pat, 1))
    local = EpisodeCounter()
    steps, denom, aborted = run_episodes(network, bits, weights, starts, settings, local)
    if counter is not None:
        counter.count += local.count

    tables = np.empty(n * n_pat)
    for e in range(n * n_pat):
        if aborted[e]:
            log.warning("episode for output %d pattern %d hit a non-finite state; scored 0",
                        e // n_pat, e % n_pat)
            tables[e] = 0.0
        else:
            tables[e] = FitnessComponents.from_episode(steps[e], denom[e], settings.t_max).f
    landscape = NkLandscape(network.masks, tables.reshape(n, n_pat), network.config.neighborhood)
    return LandscapeBuild(landscape, steps.reshape(n, n_pat), local.count)


def _fitness_at(landscape: NkLandscape, x_star) -> list:
    bits = _bits(x_star, landscape.n)
    return [float(landscape.tables[i, pattern(bits, row)]) for i, row in enumerate(landscape.masks.rows)]


def ensemble_weights(landscape: NkLandscape, x_star) -> EnsembleWeights:
    """Fitness-proportional weights ``a_i = f_i(x*) / sum_j f_j(x*)``."""
    f = _fitness_at(landscape, x_star)
    total = math.fsum(f)
    if not total > 0.0:
        raise DegenerateEnsembleError("all outputs have zero fitness at x*")
    return EnsembleWeights(tuple(v / total for v in f))


def top_m_ensemble(landscape: NkLandscape, x_star, m: int) -> EnsembleWeights:
    """Keep the ``m`` fittest outputs at ``x*`` (ties to the lower index), renormalized."""
    if m < 1 or m > landscape.n:
        raise ValueError(f"m must lie in [1, {landscape.n}], got {m}")
    f = _fitness_at(landscape, x_star)
    keep = sorted(range(landscape.n), key=lambda i: (-f[i], i))[:m]
    total = math.fsum(f[i] for i in keep)
    if not total > 0.0:
        raise DegenerateEnsembleError("selected outputs have zero fitness at x*")
    a = [0.0] * landscape.n
    for i in keep:
        a[i] = f[i] / total
    return EnsembleWeights(tuple(a))


def ensemble_output(y, weights: EnsembleWeights) -> float:
    """Weighted sum of output activations, accumulated in index order."""
    a = weights.a if isinstance(weights, EnsembleWeights) else tuple(weights)
    y = np.asarray(y, dtype=np.float64)
    if len(a) != y.shape[0]:
        raise ValueError("weights and outputs differ in length")
    acc = 0.0
    for ai, yi in zip(a, y):
        if ai != 0.0:
            acc += ai * float(yi)
    return acc


def generalization_start_states() -> tuple:
    """The 5**4 start states: every combination of the five range fractions."""
    grids = [[-r + frac * 2.0 * r for frac in GENERALIZATION_FRACTIONS] for r in GENERALIZATION_RANGES]
    return tuple(CartPoleState(x, xd, t1, t1d, 0.0, 0.0)
                 for x, xd, t1, t1d in itertools.product(*grids))


def generalization_test(network: EchoNetwork, x_star, weights,
                        settings: EpisodeSettings = EpisodeSettings(),
                        steps: int = GENERALIZATION_STEPS,
                        counter: EpisodeCounter | None = None) -> GeneralizationReport:
    states = generalization_start_states()
    n = network.n_outputs
    bits = np.tile(_bits(x_star, n), (len(states), 1))
    w = np.tile(_controller_weights(weights, n), (len(states), 1))
    trial = EpisodeSettings(steps, settings.physics, settings.domain, settings.steps_per_action)
    survived, _, _ = run_episodes(network, bits, w, np.array(states), trial, counter)
    per_state = tuple(bool(t >= steps) for t in survived)
    return GeneralizationReport(sum(per_state), per_state, states)


@dataclass(frozen=True)
class BestSingleOutput:
    output: int
    pattern: int
    x: tuple
    f: float
    steps: int
    generalization: GeneralizationReport


@dataclass(frozen=True)
class ExperimentResult:
    run_seed: int
    network_config: NetworkConfig
    best_single_output: BestSingleOutput
    x_star: Solution
    weights: EnsembleWeights
    ensemble_generalization: GeneralizationReport
    evaluation_count: int
    top_m: int | None = None
    top_m_weights: EnsembleWeights | None = None
    top_m_generalization: GeneralizationReport | None = None
    network: EchoNetwork | None = field(default=None, compare=False, repr=False)
    landscape: NkLandscape | None = field(default=None, compare=False, repr=False)

    def to_record(self) -> dict:
        """JSON-ready record; generalization outcomes are 625-character 0/1 strings."""
        best = self.best_single_output
        rec = {
            "run_seed": self.run_seed,
            "n": self.network_config.n_outputs,
            "k": self.network_config.k,
            "neighborhood": self.network_config.neighborhood.value,
            "evaluation_count": self.evaluation_count,
            "best_single_output": {
                "output": best.output,
                "pattern": best.pattern,
                "x": "".join(map(str, best.x)),
                "f": best.f,
                "steps": best.steps,
                "generalization": best.generalization.successes,
                "per_state": best.generalization.bitstring(),
            },
            "x_star": {
                "x": self.x_star.bitstring(),
                "value": self.x_star.value,
                "solver": self.x_star.provenance.value,
            },
            "ensemble": {
                "weights": list(self.weights.a),
                "generalization": self.ensemble_generalization.successes,
                "per_state": self.ensemble_generalization.bitstring(),
            },
            "top_m": None,
        }
        if self.top_m is not None:
            rec["top_m"] = {
                "m": self.top_m,
                "weights": list(self.top_m_weights.a),
                "generalization": self.top_m_generalization.successes,
                "per_state": self.top_m_generalization.bitstring(),
            }
        return rec


def episode_settings(config: ExperimentConfig) -> EpisodeSettings:
    return EpisodeSettings(t_max=config.t_max, physics=config.physics,
                           steps_per_action=config.steps_per_action)


def run_experiment(config: ExperimentConfig, run_seed: int,
                   counter: EpisodeCounter | None = None,
                   network: EchoNetwork | None = None) -> ExperimentResult:
    """Build, train, solve and test one network seeded by ``run_seed``."""
    net_config = NetworkConfig(**{**config.network.to_dict(), "seed": int(run_seed)})
    try:
        if network is None:
            network = build_network(net_config)
        settings = episode_settings(config)
        build = build_landscape(network, settings, counter=counter)
        landscape = build.landscape

        flat = int(np.argmax(landscape.tables))
        i, p = divmod(flat, landscape.tables.shape[1])
        x_best = pattern_vector(network.masks, i, p, landscape.n)
        best_gen = generalization_test(network, x_best, i, settings, counter=counter)
        best = BestSingleOutput(i, p, tuple(int(b) for b in x_best),
                                float(landscape.tables[i, p]), int(build.steps[i, p]), best_gen)

        solution = solve(landscape, config.solver, seed=int(run_seed), restarts=config.ls_restarts)
        weights = ensemble_weights(landscape, solution.x)
        ens_gen = generalization_test(network, solution.x, weights, settings, counter=counter)

        top_w = top_gen = None
        if config.top_m is not None:
            top_w = top_m_ensemble(landscape, solution.x, config.top_m)
            top_gen = generalization_test(network, solution.x, top_w, settings, counter=counter)
    except Exception as exc:
        raise RuntimeError(f"run with seed {run_seed} failed: {exc}") from exc

    return ExperimentResult(
        run_seed=int(run_seed),
        network_config=net_config,
        best_single_output=best,
        x_star=solution,
        weights=weights,
        ensemble_generalization=ens_gen,
        evaluation_count=build.episodes,
        top_m=config.top_m,
        top_m_weights=top_w,
        top_m_generalization=top_gen,
        network=network,
        landscape=landscape,
    )


@dataclass(frozen=True)
class TrajectoryRow:
    t: int
    u: tuple
    y_ensemble: float
    force: float
    state: CartPoleState


def trajectory(network: EchoNetwork, x, controller, start: CartPoleState = STANDARD_START,
               settings: EpisodeSettings = EpisodeSettings()):
    """Step-by-step replay of one episode through the public per-step API.

    Returns ``(rows, fitness)``.  Row ``t`` holds the input, ensemble output and
    force computed at step ``t`` and the state reached afterwards; the episode
    stops exactly where :func:`run_episode` stops, and the fitness matches it
    bit for bit.
    """
    from .dynamics import IntegrationError, in_success_domain, rk4_step
    from .network import scale_input

    n = network.n_outputs
    bits = _bits(x, n)
    weights = EnsembleWeights(tuple(_controller_weights(controller, n)))
    net = network.copy().reset_state()
    s = CartPoleState(*(float(v) for v in start))
    terms = [sum_term(s)]
    rows = []
    t = 0
    while t < settings.t_max:
        u = scale_input(s.x_c, s.theta1, s.theta2, settings.domain)
        y_ens = ensemble_output(net.step(u, bits), weights)
        force = _kernels.FORCE_SCALE * y_ens
        try:
            for _ in range(settings.steps_per_action):
                s = rk4_step(s, force, settings.physics)
        except IntegrationError:
            break
        rows.append(TrajectoryRow(t, tuple(float(v) for v in u), y_ens, force, s))
        if not in_success_domain(s, settings.domain):
            break
        t += 1
        terms.append(sum_term(s))
    denom = 0.0
    if t >= _kernels.STABLE_WINDOW:
        for v in terms[t - _kernels.STABLE_WINDOW:t + 1]:
            denom += v
    return rows, FitnessComponents.from_episode(t, denom, settings.t_max)


def sum_term(s: CartPoleState) -> float:
    return abs(s.x_c) + abs(s.x_c_dot) + abs(s.theta1) + abs(s.theta1_dot)
