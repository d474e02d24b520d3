import math

import pytest

from dynbins.adversaries.marbles import (
    BobPolicy,
    MarbleState,
    alice_op_counts,
    alice_strategy,
    marble_insert,
    marble_split,
    minimal_slack_bob,
    potential,
    replay_alice,
)


class TestMoves:
    def test_insert_goes_to_bag_one(self):
        state = MarbleState(8)
        mid = marble_insert(state, minimal_slack_bob(0.25))
        assert state.bag_of(mid) == 1
        assert state.marbles[mid].value == 0.25

    def test_insert_value_range_enforced(self):
        state = MarbleState(8)
        with pytest.raises(ValueError):
            marble_insert(state, minimal_slack_bob(1.5))

    def test_split_moves_up_and_down(self):
        state = MarbleState(4)
        bob = minimal_slack_bob(0.0)
        x = marble_insert(state, bob)
        y = marble_insert(state, bob)
        xp, yp = marble_split(state, x, y, bob)
        assert state.bag_of(xp) == 2
        assert state.bag_of(yp) == 0
        assert state.marbles[xp].value == pytest.approx(0.25)
        assert state.marbles[yp].value == pytest.approx(-0.25)

    def test_split_requires_same_bag(self):
        state = MarbleState(4)
        bob = minimal_slack_bob()
        x = marble_insert(state, bob)
        y = marble_insert(state, bob)
        marble_split(state, x, y, bob)
        a = marble_insert(state, bob)
        (top,) = state.bag_members(2)
        with pytest.raises(ValueError):
            marble_split(state, a, top, bob)

    def test_split_rejects_narrow_gap(self):
        state = MarbleState(8)
        cheat = BobPolicy(
            insert_value=lambda s: 0.0,
            split_values=lambda vx, vy, R: ((vx + vy) / 2 + 0.01, (vx + vy) / 2 - 0.01),
            eta=0.0,
        )
        x = marble_insert(state, cheat)
        y = marble_insert(state, cheat)
        with pytest.raises(ValueError, match="2/R"):
            marble_split(state, x, y, cheat)

    def test_split_rejects_sum_drift_beyond_eta(self):
        state = MarbleState(4)
        drift = BobPolicy(
            insert_value=lambda s: 0.0,
            split_values=lambda vx, vy, R: (0.9, 0.1),
            eta=0.5,
        )
        x = marble_insert(state, drift)
        y = marble_insert(state, drift)
        with pytest.raises(ValueError, match="eta"):
            marble_split(state, x, y, drift)

    def test_split_distinct_marbles(self):
        state = MarbleState(4)
        bob = minimal_slack_bob()
        x = marble_insert(state, bob)
        with pytest.raises(ValueError):
            marble_split(state, x, x, bob)


class TestPotential:
    def test_single_insert(self):
        state = MarbleState(4)
        marble_insert(state, minimal_slack_bob(0.5))
        assert potential(state) == pytest.approx(0.5)

    def test_zero_sum_split_raises_potential_by_gap(self):
        # A zero-sum split moves v+1/R up a bag and v-1/R down a bag, so
        # phi gains exactly (v_x' - v_y') = 2/R.
        state = MarbleState(4)
        bob = minimal_slack_bob(0.0)
        x = marble_insert(state, bob)
        y = marble_insert(state, bob)
        phi0 = potential(state)
        marble_split(state, x, y, bob)
        assert potential(state) - phi0 == pytest.approx(2 / 4)


class TestSchedule:
    @pytest.mark.parametrize("R,c", [(2, 1), (3, 1), (2, 2), (4, 2)])
    def test_op_counts_match_closed_form(self, R, c):
        sched = alice_strategy(R, c)
        inserts = sum(1 for op in sched if op[0] == "insert")
        splits = len(sched) - inserts
        assert (inserts, splits) == alice_op_counts(R, c)

    def test_small_schedule_literal(self):
        # R=2, c=1: initial insert, then phases i=1,2.
        sched = alice_strategy(2, 1)
        assert sched[0] == ("insert",)
        # phase 1: sub-phase j=1 (insert, split bag 1), then final insert
        assert sched[1:4] == [("insert",), ("split", 1), ("insert",)]

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            alice_strategy(1, 1)
        with pytest.raises(ValueError):
            alice_strategy(4, 0)


class TestReplay:
    def test_structure_holds_small(self):
        report = replay_alice(2, 1, minimal_slack_bob(0.0))
        assert (report.inserts, report.splits) == alice_op_counts(2, 1)
        assert report.max_bag_used <= 2 * 1 + 1

    def test_minimal_slack_bob_is_forced_past_one(self):
        # c=2 gives Alice 2R phases, enough to push a value beyond 1.
        report = replay_alice(8, 2, minimal_slack_bob(0.0))
        assert report.exceeded_one
        assert report.max_value > 1.0

    def test_min_split_delta_bound(self):
        # every split raises phi by at least 2/R (bag-weighted gap bound)
        report = replay_alice(4, 2, minimal_slack_bob(0.0))
        assert report.min_split_delta >= 2 / 4 - 1e-9

    def test_potential_ledger_cross_check(self):
        report = replay_alice(4, 1, minimal_slack_bob(0.1))
        assert report.final_potential == pytest.approx(report.ledger_potential, abs=1e-9)

    def test_generous_bob_exceeds_sooner(self):
        tight = replay_alice(8, 2, minimal_slack_bob(0.0), collect_csv=True)
        generous_policy = BobPolicy(
            insert_value=lambda s: 0.0,
            split_values=lambda vx, vy, R: ((vx + vy) / 2 + 2 / R, (vx + vy) / 2 - 2 / R),
            eta=0.0,
            name="generous",
        )
        generous = replay_alice(8, 2, generous_policy)
        assert generous.max_value >= tight.max_value

    def test_csv_collection(self):
        report = replay_alice(2, 1, minimal_slack_bob(0.0), collect_csv=True)
        assert report.csv_rows
        assert all(len(row.split(",")) == 5 for row in report.csv_rows)

    def test_growth_rate_scales_with_phases(self):
        # max value after cR phases is Theta(cR/R) = Theta(c) for tight Bob
        small = replay_alice(8, 1, minimal_slack_bob(0.0)).max_value
        large = replay_alice(8, 3, minimal_slack_bob(0.0)).max_value
        assert large > small
