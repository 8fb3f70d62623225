"""
SPSO2007-style particle swarm over the log2 (cost, gamma) box.

Particle 0 starts at the warm start (the WEKA default unless configured),
informant links are redrawn after every iteration that fails to improve the
global best, and positions leaving the box are clamped with the offending
velocity component zeroed.
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DefaultsMinerError, OptimizationError
from .svm import WEKA_DEFAULT, HPSetting, Provenance

logger = logging.getLogger(__name__)

SPSO_INERTIA = 1.0 / (2.0 * math.log(2.0))
SPSO_ACCELERATION = 0.5 + math.log(2.0)


@dataclass(frozen=True)
class SwarmConfig:
    population: int = 10
    max_iterations: int = 30
    budget_evaluations: int = 300
    inertia: float = SPSO_INERTIA
    acceleration: float = SPSO_ACCELERATION
    informant_count: int = 3
    seed: int = 0
    warm_start: HPSetting = None
    max_seconds: float = None

    def __post_init__(self):
        if self.population < 2:
            raise ValueError(f"population must be at least 2, got {self.population}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.budget_evaluations < self.population:
            raise ValueError(
                f"budget_evaluations ({self.budget_evaluations}) must cover the initial population ({self.population})"
            )
        if self.inertia <= 0 or self.acceleration <= 0:
            raise ValueError("inertia and acceleration must be positive")
        if self.informant_count < 1:
            raise ValueError(f"informant_count must be at least 1, got {self.informant_count}")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError(f"max_seconds must be positive, got {self.max_seconds}")

    @property
    def start(self):
        return self.warm_start or WEKA_DEFAULT


@dataclass
class ParticleState:
    position: HPSetting
    velocity: np.ndarray
    best_position: HPSetting
    best_fitness: float
    informants: tuple

    @property
    def personal_best(self):
        return self.best_position, self.best_fitness


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    particle: int
    setting: HPSetting
    fitness: float

    def to_dict(self):
        return {
            'iteration': self.iteration,
            'particle': self.particle,
            'log2_cost': self.setting.log2_cost,
            'log2_gamma': self.setting.log2_gamma,
            'fitness': self.fitness,
        }


@dataclass
class OptimTrace:
    evaluations: list = field(default_factory=list)
    global_best: tuple = None
    failed_setting: HPSetting = None
    stopped_by: str = ''

    def __len__(self):
        return len(self.evaluations)

    def to_jsonl(self):
        return ''.join(json.dumps(entry.to_dict(), sort_keys=True) + '\n' for entry in self.evaluations)


def _score(fitness, setting):
    value = fitness(setting)
    return float(getattr(value, 'value', value))


def draw_informants(population, informant_count, rng):
    """
    Adaptive random topology: every particle informs itself and
    ``informant_count`` uniformly drawn particles (with replacement).
    Returns, per particle, the sorted indices of the particles informing it.
    """
    links = np.eye(population, dtype=bool)
    targets = rng.integers(0, population, size=(population, informant_count))
    links[np.repeat(np.arange(population), informant_count), targets.ravel()] = True
    return tuple(tuple(np.flatnonzero(links[:, index]).tolist()) for index in range(population))


def init_swarm(config, space, rng=None):
    """Positions, velocities and informant links of an unevaluated swarm."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    positions = np.empty((config.population, 2))
    positions[0] = np.clip(config.start.position, space.lower, space.upper)
    positions[1:] = rng.uniform(space.lower, space.upper, size=(config.population - 1, 2))
    half_span = space.span / 2.0
    velocities = rng.uniform(-half_span, half_span, size=(config.population, 2))
    informants = draw_informants(config.population, config.informant_count, rng)

    particles = []
    for index in range(config.population):
        origin = 'warm start' if index == 0 else f'particle {index}'
        setting = space.setting(positions[index], Provenance.PSO, origin)
        particles.append(
            ParticleState(
                position=setting,
                velocity=velocities[index].copy(),
                best_position=setting,
                best_fitness=-math.inf,
                informants=informants[index],
            )
        )
    return particles


def _evaluate(fitness, setting):
    try:
        return _score(fitness, setting)
    except (DefaultsMinerError, ValueError, ArithmeticError) as exc:
        raise OptimizationError(f"fitness evaluation failed at {setting}: {exc}", setting=setting) from exc


def _best_informant(particles, particle):
    # Highest personal best among informants; lowest index on ties.
    return max(particle.informants, key=lambda index: (particles[index].best_fitness, -index))


def pso_step(particles, global_best, config, space, fitness, rng, iteration=1, limit=None):
    """
    Move and evaluate the swarm once.

    All moves are computed from the incoming state, then particles are
    evaluated in index order; personal and global bests only change on a
    strictly better fitness. ``limit`` caps how many particles move when the
    remaining budget is smaller than the population.

    Returns ``(particles, trace_entries, global_best, improved)``.
    """
    count = len(particles) if limit is None else min(limit, len(particles))
    lower, upper = space.lower, space.upper
    moved = []
    for index in range(count):
        particle = particles[index]
        leader = particles[_best_informant(particles, particle)]
        position = particle.position.position
        velocity = (
            config.inertia * particle.velocity
            + rng.uniform(0.0, config.acceleration, 2) * (particle.best_position.position - position)
            + rng.uniform(0.0, config.acceleration, 2) * (leader.best_position.position - position)
        )
        position = position + velocity
        outside = (position < lower) | (position > upper)
        velocity[outside] = 0.0
        position = np.clip(position, lower, upper)
        moved.append((space.setting(position, Provenance.PSO, f'particle {index}'), velocity))

    best_setting, best_fitness = global_best
    improved = False
    updated = list(particles)
    entries = []
    for index, (setting, velocity) in enumerate(moved):
        value = _evaluate(fitness, setting)
        entries.append(TraceEntry(iteration, index, setting, value))
        previous = particles[index]
        if value > previous.best_fitness:
            best_position, personal = setting, value
        else:
            best_position, personal = previous.best_position, previous.best_fitness
        updated[index] = replace(
            previous,
            position=setting,
            velocity=velocity,
            best_position=best_position,
            best_fitness=personal,
        )
        if value > best_fitness:
            best_setting, best_fitness = setting, value
            improved = True
    return updated, entries, (best_setting, best_fitness), improved


def pso_run(config, space, fitness):
    """
    Run the swarm until the evaluation budget or the iteration cap is hit.

    The initial population counts as iteration 0 and against the budget, so
    the defaults (10 particles, 30 iterations, 300 evaluations) spend
    exactly 300 evaluations.
    """
    rng = np.random.default_rng(config.seed)
    particles = init_swarm(config, space, rng)
    trace = OptimTrace()
    started = time.monotonic()

    try:
        best = (None, -math.inf)
        for index, particle in enumerate(particles):
            value = _evaluate(fitness, particle.position)
            trace.evaluations.append(TraceEntry(0, index, particle.position, value))
            particle.best_fitness = value
            if value > best[1]:
                best = (particle.position, value)
        trace.global_best = best

        iteration = 1
        trace.stopped_by = 'budget'
        while len(trace) < config.budget_evaluations:
            if iteration >= config.max_iterations:
                trace.stopped_by = 'iterations'
                break
            if config.max_seconds is not None and time.monotonic() - started > config.max_seconds:
                trace.stopped_by = 'time'
                break
            remaining = config.budget_evaluations - len(trace)
            particles, entries, trace.global_best, improved = pso_step(
                particles, trace.global_best, config, space, fitness, rng, iteration, limit=remaining
            )
            trace.evaluations.extend(entries)
            if not improved:
                links = draw_informants(len(particles), config.informant_count, rng)
                particles = [replace(particle, informants=links[index]) for index, particle in enumerate(particles)]
            iteration += 1
    except OptimizationError as exc:
        trace.failed_setting = exc.setting
        trace.stopped_by = 'error'
        raise OptimizationError(str(exc), setting=exc.setting, trace=trace) from exc

    setting, value = trace.global_best
    logger.debug(
        "Swarm seed %s finished after %d evaluations (%s): best %s = %.6f",
        config.seed,
        len(trace),
        trace.stopped_by,
        setting,
        value,
    )
    return trace
