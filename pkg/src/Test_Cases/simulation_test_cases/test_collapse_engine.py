"""
Unit tests for the collapse engine
Tests the clamped mass step, branch rescaling, sequencing and walks to absorption
"""

import unittest
import sys
import os

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Add Simulation_Codebase to path to import simulation modules
simulation_codebase_path = os.path.join(
    os.path.dirname(__file__), "..", "..", "Simulation_Codebase"
)
sys.path.insert(0, simulation_codebase_path)

from collapse_engine import (
    Branch,
    CollapseConfig,
    ScheduledInteraction,
    SequenceCounter,
    SequencingMode,
    collapse_step,
    drive_to_absorption,
    effective_delta,
    interleaved_evolution,
    mass_after_steps,
    rescale_branches,
    run_walk,
    shift_mass,
    step_outcomes,
)
from collapse_errors import (
    DegenerateDecompositionError,
    DomainError,
    SequencingError,
    StepBudgetExceededError,
)
from seed_streams import trial_generator
from state_core import (
    BasisTag,
    PureState,
    apply_controlled_flip,
    branch_decompose,
    make_initial_state,
    subject_up,
)

amplitude_parts = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def phased_state(real_parts, imag_parts):
    """Three-particle state with both subject branches populated."""
    amplitudes = np.array(real_parts) + 1j * np.array(imag_parts)
    # fixed reference components on each side of the subject-up predicate
    amplitudes[0b000] = 0.5 + 0.25j
    amplitudes[0b100] = -0.5 + 0.5j
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return PureState(3, amplitudes, (BasisTag.X,) * 3)


class TestCollapseConfig(unittest.TestCase):
    """Test cases for CollapseConfig validation"""

    def test_delta_range(self):
        """delta_ave must lie in (0, 0.5]"""
        for bad in (0.0, -0.1, 0.7):
            with self.assertRaises(DomainError):
                CollapseConfig(delta_ave=bad)
        self.assertEqual(CollapseConfig(delta_ave=0.5).delta_ave, 0.5)

    def test_seed_range(self):
        """Negative or oversized seeds are rejected"""
        with self.assertRaises(DomainError):
            CollapseConfig(delta_ave=0.1, master_seed=-1)
        with self.assertRaises(DomainError):
            CollapseConfig(delta_ave=0.1, master_seed=1 << 64)
        CollapseConfig(delta_ave=0.1, master_seed=(1 << 64) - 1)

    def test_forced_same_s_flag(self):
        """The sequencing mode is exposed as a flag"""
        config = CollapseConfig(delta_ave=0.1, sequencing_mode=SequencingMode.FORCED_SAME_S)
        self.assertTrue(config.forced_same_s)
        self.assertFalse(CollapseConfig(delta_ave=0.1).forced_same_s)


class TestMassStep(unittest.TestCase):
    """Test cases for the clamped two-branch mass step"""

    def test_interior_step(self):
        """Away from the ends the step is the full delta"""
        down, up = step_outcomes(0.5, 0.1)
        self.assertAlmostEqual(down, 0.4, places=15)
        self.assertAlmostEqual(up, 0.6, places=15)

    def test_clamped_step_absorbs_exactly(self):
        """p < delta: the step clamps to p and the down move lands on exactly 0"""
        down, up = step_outcomes(0.005, 0.01)
        self.assertEqual(down, 0.0)
        self.assertAlmostEqual(up, 0.01, places=15)
        down, up = step_outcomes(0.995, 0.01)
        self.assertEqual(up, 1.0)

    def test_tiny_mass_is_not_wiped_out(self):
        """A mass far below the rounding scale still steps to 0 or 2p, averaging back to p"""
        down, up = step_outcomes(4e-13, 0.01)
        self.assertEqual(down, 0.0)
        self.assertAlmostEqual(up / 8e-13, 1.0, places=12)
        self.assertAlmostEqual((down + up) / 2.0 / 4e-13, 1.0, places=12)

    def test_tiny_delta_moves_mass(self):
        """delta = 1e-13 shifts an interior mass by exactly that much"""
        down, up = step_outcomes(1e-13, 1e-13)
        self.assertEqual(down, 0.0)
        self.assertAlmostEqual(up / 2e-13, 1.0, places=12)
        down, up = step_outcomes(0.5, 1e-13)
        self.assertLess(down, 0.5)
        self.assertGreater(up, 0.5)

    def test_rounding_residue_snaps_to_the_end(self):
        """A move that leaves only float residue of the step lands exactly on the end"""
        self.assertEqual(shift_mass(0.01 + 1e-17, 0.01, False), 0.0)
        self.assertEqual(shift_mass(0.99 - 2e-16, 0.01, True), 1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=1e-300, max_value=1e-9),
        st.floats(min_value=1e-300, max_value=0.5),
    )
    def test_step_is_martingale_for_tiny_masses(self, p, delta):
        """Relative to p, the average of both outcomes is p for masses near zero"""
        down, up = step_outcomes(p, delta)
        self.assertLessEqual(abs((down + up) / 2.0 - p), 1e-12 * p)
        self.assertTrue(0.0 <= down <= p <= up)

    def test_effective_delta(self):
        """delta_eff = min(delta, p, 1 - p)"""
        self.assertEqual(effective_delta(0.5, 0.1), 0.1)
        self.assertEqual(effective_delta(0.03, 0.1), 0.03)
        self.assertAlmostEqual(effective_delta(0.98, 0.1), 0.02, places=15)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
        st.floats(min_value=1e-6, max_value=0.5),
    )
    def test_step_is_martingale(self, p, delta):
        """The two equally likely outcomes average back to p and stay in [0, 1]"""
        down, up = step_outcomes(p, delta)
        self.assertLessEqual(abs((down + up) / 2.0 - p), 1e-12)
        self.assertTrue(0.0 <= down <= p <= up <= 1.0)

    def test_martingale_on_grid(self):
        """Exact enumeration over a grid of masses and deltas"""
        for delta in (0.01, 0.05, 0.1, 0.25, 0.5):
            for p in np.linspace(0.01, 0.99, 99):
                down, up = step_outcomes(float(p), delta)
                self.assertAlmostEqual((down + up) / 2.0, float(p), places=14)

    def test_shift_mass_direction(self):
        """increase moves mass into the interacting branch"""
        self.assertGreater(shift_mass(0.3, 0.05, True), 0.3)
        self.assertLess(shift_mass(0.3, 0.05, False), 0.3)


class TestSequenceCounter(unittest.TestCase):
    """Test cases for SequenceCounter"""

    def test_automatic_placement_advances(self):
        """Automatic placement gives 0, 1, 2 with no same-s pairs"""
        counter = SequenceCounter()
        placed = [counter.place() for _ in range(3)]
        self.assertEqual(placed, [(0, False), (1, False), (2, False)])
        self.assertEqual(counter.history, [0, 1, 2])

    def test_explicit_repeat_is_same_s(self):
        """An explicit repeat of the last s marks a spacelike partner"""
        counter = SequenceCounter()
        counter.place(4)
        self.assertEqual(counter.place(4), (4, True))
        self.assertEqual(counter.place(), (5, False))

    def test_decreasing_s_rejected(self):
        """s never goes backwards"""
        counter = SequenceCounter()
        counter.place(3)
        with self.assertRaises(SequencingError):
            counter.place(2)

    def test_forced_same(self):
        """Forced placement keeps every interaction on one s"""
        counter = SequenceCounter()
        results = [counter.place(forced_same=True) for _ in range(3)]
        self.assertEqual(results, [(0, False), (0, True), (0, True)])


class TestCollapseStep(unittest.TestCase):
    """Test cases for collapse_step and rescale_branches"""

    def setUp(self):
        """Set up test fixtures"""
        self.config = CollapseConfig(delta_ave=0.1, master_seed=3)
        self.state = apply_controlled_flip(make_initial_state(2), 1)
        self.predicate = subject_up(3)

    def test_step_moves_by_delta(self):
        """Each step lands on p +/- delta and keeps the norm"""
        for trial in range(20):
            decomposition = branch_decompose(self.state, self.predicate)
            new_state, record = collapse_step(
                self.state,
                decomposition,
                self.config,
                trial_generator(3, trial),
                SequenceCounter(),
            )
            self.assertAlmostEqual(abs(record.mass_after - 0.5), 0.1, places=12)
            self.assertAlmostEqual(new_state.norm_squared(), 1.0, places=12)
            after = branch_decompose(new_state, self.predicate)
            self.assertAlmostEqual(after.mass_interacting, record.mass_after, places=12)

    def test_forced_same_s_is_identity(self):
        """Forced same-s leaves the amplitudes untouched and draws nothing"""
        config = CollapseConfig(delta_ave=0.1, sequencing_mode=SequencingMode.FORCED_SAME_S)
        rng = trial_generator(0, 0)
        reference = trial_generator(0, 0)
        decomposition = branch_decompose(self.state, self.predicate)
        new_state, record = collapse_step(
            self.state, decomposition, config, rng, SequenceCounter()
        )
        self.assertTrue(np.array_equal(new_state.amplitudes, self.state.amplitudes))
        self.assertTrue(record.skipped)
        self.assertEqual(rng.random(), reference.random())

    def test_degenerate_step_rejected(self):
        """A step on a one-sided decomposition raises"""
        amplitudes = np.zeros(8, dtype=np.complex128)
        amplitudes[0b000] = 1.0
        state = PureState(3, amplitudes, (BasisTag.X,) * 3)
        decomposition = branch_decompose(state, self.predicate, allow_degenerate=True)
        with self.assertRaises(DegenerateDecompositionError):
            collapse_step(
                state, decomposition, self.config, trial_generator(0, 0), SequenceCounter()
            )

    def test_absorption_zeroes_dead_branch(self):
        """delta = 0.5 on equal branches kills one branch outright"""
        config = CollapseConfig(delta_ave=0.5)
        decomposition = branch_decompose(self.state, self.predicate)
        new_state, record = collapse_step(
            self.state, decomposition, config, trial_generator(0, 1), SequenceCounter()
        )
        self.assertIsNotNone(record.absorbed_branch)
        dead = (
            ~decomposition.interacting_mask
            if record.absorbed_branch is Branch.INTERACTING
            else decomposition.interacting_mask
        )
        self.assertTrue(np.all(new_state.amplitudes[dead] == 0))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(amplitude_parts, min_size=8, max_size=8),
        st.lists(amplitude_parts, min_size=8, max_size=8),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_rescale_preserves_relative_phases(self, real_parts, imag_parts, target):
        """Amplitude ratios inside each branch survive the rescale"""
        state = phased_state(real_parts, imag_parts)
        decomposition = branch_decompose(state, self.predicate)
        target = min(max(target, 0.01), 0.99)
        rescaled = rescale_branches(state, decomposition, target)
        self.assertAlmostEqual(rescaled.norm_squared(), 1.0, places=12)
        for mask, reference in (
            (decomposition.interacting_mask, 0b000),
            (~decomposition.interacting_mask, 0b100),
        ):
            before = state.amplitudes[mask] / state.amplitudes[reference]
            after = rescaled.amplitudes[mask] / rescaled.amplitudes[reference]
            np.testing.assert_allclose(after, before, atol=1e-9)


class TestWalks(unittest.TestCase):
    """Test cases for run_walk and mass_after_steps"""

    def test_grid_walk_stays_on_grid(self):
        """p0 and 1 on the delta grid: every visited mass is a grid point"""
        config = CollapseConfig(delta_ave=0.1, record_trajectory=True)
        for trial in range(25):
            result = run_walk(0.2, config, trial_generator(0, trial))
            grid = np.array(result.trajectory) / 0.1
            np.testing.assert_allclose(grid, np.round(grid), atol=1e-9)
            self.assertIn(result.trajectory[-1], (0.0, 1.0))
            self.assertEqual(len(result.trajectory), result.steps + 1)
            self.assertEqual(result.final_mass, result.trajectory[-1])

    def test_off_grid_walk_terminates_exactly(self):
        """Off-grid walks still end on exactly 0 or 1"""
        config = CollapseConfig(delta_ave=0.07, record_trajectory=True)
        for trial in range(25):
            result = run_walk(0.33, config, trial_generator(1, trial))
            self.assertIn(result.trajectory[-1], (0.0, 1.0))
            self.assertTrue(all(0.0 < p < 1.0 for p in result.trajectory[:-1]))

    def test_walk_is_reproducible(self):
        """Same (seed, trial) gives the same walk"""
        config = CollapseConfig(delta_ave=0.05, master_seed=9, record_trajectory=True)
        first = run_walk(0.4, config, trial_generator(9, 17))
        second = run_walk(0.4, config, trial_generator(9, 17))
        self.assertEqual(first.trajectory, second.trajectory)
        self.assertEqual(first.absorbed_branch, second.absorbed_branch)

    def test_step_budget(self):
        """A walk that cannot finish in max_steps raises with the state reached"""
        config = CollapseConfig(delta_ave=0.01, max_steps=1)
        with self.assertRaises(StepBudgetExceededError) as context:
            run_walk(0.5, config, trial_generator(0, 0))
        self.assertEqual(context.exception.steps, 1)

    def test_walk_rejects_bad_inputs(self):
        """p0 at the ends and forced same-s are rejected"""
        with self.assertRaises(DomainError):
            run_walk(1.0, CollapseConfig(delta_ave=0.1), trial_generator(0, 0))
        config = CollapseConfig(delta_ave=0.1, sequencing_mode=SequencingMode.FORCED_SAME_S)
        with self.assertRaises(SequencingError):
            run_walk(0.5, config, trial_generator(0, 0))

    def test_single_step_born_frequency(self):
        """delta = 0.5 from p0 = 0.5 absorbs in one step, each side half the time"""
        config = CollapseConfig(delta_ave=0.5)
        results = [run_walk(0.5, config, trial_generator(0, i)) for i in range(2000)]
        self.assertTrue(all(result.steps == 1 for result in results))
        interacting = sum(result.absorbed_branch is Branch.INTERACTING for result in results)
        self.assertLess(abs(interacting / 2000 - 0.5), 4 * np.sqrt(0.25 / 2000))

    def test_mass_after_steps(self):
        """Zero steps returns p0; absorbed masses stay put"""
        config = CollapseConfig(delta_ave=0.5)
        self.assertEqual(mass_after_steps(0.3, 0, config, trial_generator(0, 0)), 0.3)
        for trial in range(10):
            mass = mass_after_steps(0.5, 5, config, trial_generator(0, trial))
            self.assertIn(mass, (0.0, 1.0))


class TestInterleavedEvolution(unittest.TestCase):
    """Test cases for interleaved_evolution and drive_to_absorption"""

    def setUp(self):
        """Set up test fixtures"""
        self.n_detectors = 3
        self.predicate = subject_up(self.n_detectors + 1)
        self.schedule = [
            ScheduledInteraction(
                interaction=lambda state, d=detector: apply_controlled_flip(state, d),
                predicate=self.predicate,
                label=f"flip-{detector}",
            )
            for detector in range(1, self.n_detectors + 1)
        ]

    def test_tiny_delta_tracks_unitary(self):
        """With delta near zero the collapsed state matches the unitary one"""
        initial = make_initial_state(self.n_detectors)
        unitary = initial
        for detector in range(1, self.n_detectors + 1):
            unitary = apply_controlled_flip(unitary, detector)
        config = CollapseConfig(delta_ave=1e-9)
        state, records = interleaved_evolution(
            initial, self.schedule, config, trial_generator(0, 0)
        )
        np.testing.assert_allclose(state.amplitudes, unitary.amplitudes, atol=1e-6)
        self.assertEqual([record.s for record in records], [0, 1, 2])
        self.assertTrue(all(not record.skipped for record in records))

    def test_forced_same_s_is_exactly_unitary(self):
        """Forced same-s sequencing reproduces the unitary-only amplitudes bit for bit"""
        initial = make_initial_state(self.n_detectors)
        unitary = initial
        for detector in range(1, self.n_detectors + 1):
            unitary = apply_controlled_flip(unitary, detector)
        config = CollapseConfig(delta_ave=0.5, sequencing_mode=SequencingMode.FORCED_SAME_S)
        state, records = interleaved_evolution(
            initial, self.schedule, config, trial_generator(0, 0)
        )
        self.assertTrue(np.array_equal(state.amplitudes, unitary.amplitudes))
        self.assertEqual([record.s for record in records], [0, 0, 0])
        self.assertTrue(all(record.skipped for record in records))

    def test_absorbed_run_records_degenerate_steps(self):
        """After absorption the remaining interactions produce degenerate records"""
        config = CollapseConfig(delta_ave=0.5)
        state, records = interleaved_evolution(
            make_initial_state(self.n_detectors), self.schedule, config, trial_generator(0, 0)
        )
        self.assertIsNotNone(records[0].absorbed_branch)
        self.assertTrue(all(record.degenerate for record in records[1:]))
        self.assertAlmostEqual(state.norm_squared(), 1.0, places=12)

    def test_drive_to_absorption(self):
        """Forced collapse ends on a degenerate decomposition"""
        config = CollapseConfig(delta_ave=0.1)
        state, records = drive_to_absorption(
            make_initial_state(self.n_detectors), self.predicate, config, trial_generator(0, 2)
        )
        decomposition = branch_decompose(state, self.predicate, allow_degenerate=True)
        self.assertTrue(decomposition.is_degenerate)
        self.assertIsNotNone(records[-1].absorbed_branch)

    def test_drive_to_absorption_rejects_same_s(self):
        """Forced same-s cannot drive a collapse"""
        config = CollapseConfig(delta_ave=0.1, sequencing_mode=SequencingMode.FORCED_SAME_S)
        with self.assertRaises(SequencingError):
            drive_to_absorption(
                make_initial_state(1), subject_up(2), config, trial_generator(0, 0)
            )


if __name__ == "__main__":
    unittest.main()
