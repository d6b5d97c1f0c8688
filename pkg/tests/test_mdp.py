import numpy as np
import pytest

from worstpath import (
    EnvConfig,
    InfeasibleActionError,
    Path,
    PathError,
    TerminalStateError,
    TreeMdp,
    generate,
)

from conftest import A, B, C, G, H, one_step_mdp


class TestReward:
    def test_building_block_scores_one(self, figure_mdp):
        assert figure_mdp.reward(C) == 1

    def test_other_states_score_zero(self, figure_mdp):
        assert figure_mdp.reward(A) == 0

    def test_generated_env_flag_count(self):
        mdp, _ = generate(EnvConfig(num_states=20, bb_fraction=0.4, seed=1))
        total = sum(mdp.reward(s) for s in range(mdp.num_states))
        assert total == 8

    def test_out_of_range_state(self, figure_mdp):
        with pytest.raises(IndexError):
            figure_mdp.reward(99)
        with pytest.raises(IndexError):
            figure_mdp.reward(-1)


class TestExpand:
    def test_branching_decomposition(self, figure_mdp):
        assert figure_mdp.expand(B, 0) == [3, 4]

    def test_single_child_action(self, figure_mdp):
        assert figure_mdp.expand(G, 0) == [H]

    def test_matches_serialized_file(self):
        from worstpath import serialize

        mdp, base = generate(EnvConfig(num_states=20, seed=42))
        doc = serialize(mdp, base)
        line = next(l for l in doc.splitlines() if l.startswith("t "))
        fields = line.split()
        s, a = int(fields[1]), int(fields[2])
        assert figure_children(fields) == mdp.expand(s, a)

    def test_infeasible_action(self, figure_mdp):
        with pytest.raises(InfeasibleActionError):
            figure_mdp.expand(B, 5)

    def test_terminal_state(self, figure_mdp):
        with pytest.raises(TerminalStateError):
            figure_mdp.expand(C, 0)

    def test_deterministic(self, figure_mdp):
        assert figure_mdp.expand(A, 0) == figure_mdp.expand(A, 0)


def figure_children(fields):
    return [int(c) for c in fields[4:]]


class TestValidate:
    def test_well_formed_env(self):
        mdp, _ = generate(EnvConfig(num_states=30, seed=3))
        assert mdp.validate() == []

    def test_action_on_building_block(self):
        mdp = TreeMdp([[[1]], []], [True, True], 0.9)
        problems = mdp.validate()
        assert len(problems) == 1
        assert "state 0" in problems[0]

    def test_empty_child_list(self):
        mdp = TreeMdp([[[1], []], []], [False, True], 0.9)
        problems = mdp.validate()
        assert len(problems) == 1
        assert "state 0 action 1" in problems[0]

    def test_bad_gamma(self):
        mdp = TreeMdp([[[1]], []], [False, True], 1.5)
        assert any("gamma" in p for p in mdp.validate())

    def test_terminality_matches_building_block_flags(self):
        mdp, _ = generate(EnvConfig(num_states=40, seed=9))
        for s in range(mdp.num_states):
            assert (mdp.num_actions(s) == 0) == bool(mdp.building_block[s])
            assert (mdp.reward(s) == 1) == bool(mdp.building_block[s])


class TestPath:
    def test_consistent_path_passes(self, figure_mdp):
        Path((A, B, 4, G, H), (0, 0, 0, 0)).validate_against(figure_mdp)

    def test_wrong_child_fails(self, figure_mdp):
        with pytest.raises(PathError):
            Path((A, G), (0,)).validate_against(figure_mdp)

    def test_length_mismatch_fails(self, figure_mdp):
        with pytest.raises(PathError):
            Path((A, B), (0, 0)).validate_against(figure_mdp)

    def test_action_through_terminal_fails(self, figure_mdp):
        with pytest.raises(PathError):
            Path((C, A), (0,)).validate_against(figure_mdp)


def test_equality_and_repr():
    m1 = one_step_mdp()
    m2 = one_step_mdp()
    assert m1 == m2
    assert m1 != one_step_mdp(gamma=0.9)
    assert "num_states=2" in repr(m1)


def test_flat_layout_offsets(figure_mdp):
    assert figure_mdp.num_pairs == 5
    assert figure_mdp.pair_index(A, 1) == 1
    assert list(figure_mdp.pair_state) == [0, 0, 1, 4, 6]
    np.testing.assert_array_equal(figure_mdp.flat_children, [1, 2, 2, 3, 4, 5, 6, 7])
