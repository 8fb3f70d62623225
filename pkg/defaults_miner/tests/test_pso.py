import math
import time

import numpy as np
import pytest
from django.test import SimpleTestCase

from defaults_miner.exceptions import OptimizationError
from defaults_miner.pso import (
    ParticleState,
    SwarmConfig,
    draw_informants,
    init_swarm,
    pso_run,
    pso_step,
)
from defaults_miner.random_search import sample_settings
from defaults_miner.svm import WEKA_DEFAULT, HPSetting, HPSpace, Provenance

OPTIMUM = np.array([3.0, -4.0])


def sphere(setting):
    return -float(np.sum((setting.position - OPTIMUM) ** 2))


def constant(setting):
    return 0.5


class SwarmConfigTest(SimpleTestCase):
    """Test swarm configuration checks."""

    def test_defaults(self):
        """Test the defaults spend 300 evaluations with 10 particles."""
        config = SwarmConfig()

        self.assertEqual((config.population, config.max_iterations, config.budget_evaluations), (10, 30, 300))
        self.assertAlmostEqual(config.inertia, 0.721347, places=6)
        self.assertAlmostEqual(config.acceleration, 1.193147, places=6)
        self.assertEqual(config.start, WEKA_DEFAULT)

    def test_budget_covers_population(self):
        """Test the budget must pay for the initial population."""
        with self.assertRaises(ValueError):
            SwarmConfig(population=10, budget_evaluations=9)

    def test_population_size(self):
        """Test a swarm needs two particles."""
        with self.assertRaises(ValueError):
            SwarmConfig(population=1)

    def test_time_limit_positive(self):
        """Test the wall-clock limit must be positive."""
        with self.assertRaises(ValueError):
            SwarmConfig(max_seconds=0)


class InitSwarmTest(SimpleTestCase):
    """Test swarm initialization."""

    def test_warm_start_first(self):
        """Test particle 0 starts at the warm start."""
        particles = init_swarm(SwarmConfig(seed=1), HPSpace())

        self.assertEqual(particles[0].position.position.tolist(), WEKA_DEFAULT.position.tolist())
        self.assertEqual(particles[0].position.origin, 'warm start')
        self.assertEqual(particles[0].position.provenance, Provenance.PSO)

    def test_custom_warm_start(self):
        """Test a configured warm start replaces the WEKA default."""
        particles = init_swarm(SwarmConfig(warm_start=HPSetting(2.0, -3.0)), HPSpace())

        self.assertEqual(particles[0].position.position.tolist(), [2.0, -3.0])

    def test_inside_box(self):
        """Test every initial position lies in the search box."""
        space = HPSpace(cost_bounds=(-5.0, 5.0), gamma_bounds=(-2.0, 8.0))
        particles = init_swarm(SwarmConfig(population=40, budget_evaluations=40, seed=2), space)

        self.assertTrue(all(space.contains(particle.position) for particle in particles))
        self.assertTrue(all(particle.best_fitness == -math.inf for particle in particles))

    def test_informants_include_self(self):
        """Test every particle informs itself."""
        links = draw_informants(10, 3, np.random.default_rng(0))

        self.assertEqual(len(links), 10)
        for index, informants in enumerate(links):
            self.assertIn(index, informants)
            self.assertLessEqual(len(informants), 10)


class PsoStepTest(SimpleTestCase):
    """Test a single swarm move."""

    def test_clamped_component_stops(self):
        """Test a particle pushed past the bound is clamped and loses that velocity component."""
        space = HPSpace()
        edge = HPSetting(15.0, 0.0, Provenance.PSO)
        particles = [
            ParticleState(edge, np.array([5.0, 0.0]), edge, 0.0, (0, 1)),
            ParticleState(edge, np.array([5.0, 0.0]), edge, 0.0, (0, 1)),
        ]
        config = SwarmConfig(population=2, budget_evaluations=10)

        moved, entries, _, improved = pso_step(
            particles, (edge, 0.0), config, space, lambda s: 0.0, np.random.default_rng(0)
        )

        self.assertEqual(moved[0].position.log2_cost, 15.0)
        self.assertEqual(moved[0].velocity[0], 0.0)
        self.assertEqual(len(entries), 2)
        self.assertFalse(improved)

    def test_limit(self):
        """Test only the first ``limit`` particles move."""
        config = SwarmConfig(seed=3)
        particles = init_swarm(config, HPSpace())
        for particle in particles:
            particle.best_fitness = 0.0

        moved, entries, _, _ = pso_step(
            particles, (particles[0].position, 0.0), config, HPSpace(), constant, np.random.default_rng(3), limit=4
        )

        self.assertEqual([entry.particle for entry in entries], [0, 1, 2, 3])
        self.assertIs(moved[7], particles[7])


class PsoRunTest(SimpleTestCase):
    """Test complete swarm runs."""

    def test_exact_budget(self):
        """Test the default configuration spends exactly 300 evaluations."""
        trace = pso_run(SwarmConfig(seed=0), HPSpace(), sphere)

        self.assertEqual(len(trace), 300)
        self.assertEqual(trace.stopped_by, 'budget')
        self.assertEqual(trace.evaluations[0].setting.position.tolist(), WEKA_DEFAULT.position.tolist())

    def test_partial_last_iteration(self):
        """Test a budget that is not a multiple of the population is honoured."""
        trace = pso_run(SwarmConfig(budget_evaluations=25, seed=0), HPSpace(), sphere)

        self.assertEqual(len(trace), 25)
        self.assertEqual([entry.iteration for entry in trace.evaluations][-5:], [2] * 5)

    def test_initial_population_only(self):
        """Test a budget equal to the population evaluates the initial swarm only."""
        trace = pso_run(SwarmConfig(budget_evaluations=10, seed=0), HPSpace(), sphere)

        self.assertEqual(len(trace), 10)
        self.assertTrue(all(entry.iteration == 0 for entry in trace.evaluations))

    def test_iteration_cap(self):
        """Test the iteration cap stops the run before the budget."""
        trace = pso_run(SwarmConfig(max_iterations=3, seed=0), HPSpace(), sphere)

        self.assertEqual(len(trace), 30)
        self.assertEqual(trace.stopped_by, 'iterations')

    def test_time_limit(self):
        """Test the wall-clock limit stops the run after the current iteration."""

        def slow(setting):
            time.sleep(0.002)
            return 0.0

        trace = pso_run(SwarmConfig(max_seconds=0.001, seed=0), HPSpace(), slow)

        self.assertEqual(trace.stopped_by, 'time')
        self.assertEqual(len(trace), 10)

    def test_constant_fitness_keeps_warm_start(self):
        """Test the global best only moves on a strict improvement."""
        trace = pso_run(SwarmConfig(seed=5), HPSpace(), constant)
        best, value = trace.global_best

        self.assertEqual(best.position.tolist(), WEKA_DEFAULT.position.tolist())
        self.assertEqual(value, 0.5)

    def test_global_best_is_trace_max(self):
        """Test the reported best is the first maximum of the trace."""
        trace = pso_run(SwarmConfig(seed=6), HPSpace(), sphere)
        fitnesses = [entry.fitness for entry in trace.evaluations]

        self.assertEqual(trace.global_best[1], max(fitnesses))
        first = trace.evaluations[fitnesses.index(max(fitnesses))]
        self.assertEqual(trace.global_best[0].position.tolist(), first.setting.position.tolist())

    def test_deterministic(self):
        """Test the same seed reproduces the trace."""
        first = pso_run(SwarmConfig(seed=7), HPSpace(), sphere)
        second = pso_run(SwarmConfig(seed=7), HPSpace(), sphere)

        self.assertEqual(first.to_jsonl(), second.to_jsonl())

    def test_failure_keeps_partial_trace(self):
        """Test a failing evaluation aborts with the trace so far and the failing setting."""
        calls = []

        def failing(setting):
            calls.append(setting)
            if len(calls) == 5:
                raise ValueError('boom')
            return 0.0

        with self.assertRaises(OptimizationError) as caught:
            pso_run(SwarmConfig(seed=0), HPSpace(), failing)

        error = caught.exception
        self.assertEqual(len(error.trace), 4)
        self.assertEqual(error.trace.stopped_by, 'error')
        self.assertIs(error.setting, calls[-1])
        self.assertIs(error.trace.failed_setting, calls[-1])

    def test_jsonl(self):
        """Test the trace serializes one line per evaluation."""
        trace = pso_run(SwarmConfig(budget_evaluations=12, seed=0), HPSpace(), sphere)

        self.assertEqual(len(trace.to_jsonl().splitlines()), 12)


@pytest.mark.slow
def test_swarm_beats_random_draws_on_sphere():
    space = HPSpace()
    wins = 0
    for seed in range(10):
        swarm = pso_run(SwarmConfig(seed=seed), space, sphere).global_best[1]
        draws = max(sphere(setting) for setting in sample_settings(space, 300, np.random.default_rng(seed)))
        wins += swarm > draws
    assert wins >= 8


@pytest.mark.slow
def test_swarm_converges_on_sphere():
    hits = 0
    for seed in range(10):
        best, _ = pso_run(SwarmConfig(seed=seed), HPSpace(), sphere).global_best
        hits += np.linalg.norm(best.position - OPTIMUM) <= 1.0
    assert hits >= 9
