import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _support import random_mdp, rng
from qtube.mdp import (
    MdpSpec,
    MdpValidationError,
    action_transition_matrix,
    as_stochastic,
    enumerate_policies,
    greedy_policy,
    policy_kernel,
    q_index,
    q_split,
    q_to_table,
    state_kernel,
    stack_transitions,
    table_to_q,
    validate,
)


def _toy_spec():
    from qtube.fileio import toy3x2

    m = toy3x2()
    return MdpSpec(m.name, m.gamma, m.num_states, m.num_actions,
                   np.array(m.transitions), np.array(m.rewards))


class TestValidate:
    def test_accepts_toy(self, toy):
        assert toy.num_pairs == 6
        assert toy.gamma == 0.95

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_bad_gamma(self, gamma):
        spec = _toy_spec()
        spec.gamma = gamma
        with pytest.raises(MdpValidationError, match="gamma"):
            validate(spec)

    @pytest.mark.parametrize("field,value", [("num_states", 0), ("num_actions", -1),
                                             ("num_states", 2.0)])
    def test_rejects_bad_sizes(self, field, value):
        spec = _toy_spec()
        setattr(spec, field, value)
        with pytest.raises(MdpValidationError, match="positive integer"):
            validate(spec)

    def test_rejects_transition_shape(self):
        spec = _toy_spec()
        spec.transitions = spec.transitions[:, :2, :]
        with pytest.raises(MdpValidationError, match="transitions shape"):
            validate(spec)

    def test_rejects_reward_shape(self):
        spec = _toy_spec()
        spec.rewards = spec.rewards.T
        with pytest.raises(MdpValidationError, match="rewards shape"):
            validate(spec)

    def test_rejects_nonfinite_reward_with_indices(self):
        spec = _toy_spec()
        spec.rewards = spec.rewards.copy()
        spec.rewards[2, 1] = np.nan
        with pytest.raises(MdpValidationError, match=r"rewards\[2, 1\]"):
            validate(spec)

    def test_rejects_negative_probability_with_indices(self):
        spec = _toy_spec()
        spec.transitions = spec.transitions.copy()
        spec.transitions[1, 0, 2] = -0.1
        with pytest.raises(MdpValidationError, match=r"transitions\[1, 0, 2\]"):
            validate(spec)

    def test_rejects_bad_row_sum_with_indices(self):
        spec = _toy_spec()
        spec.transitions = spec.transitions.copy()
        spec.transitions[0, 1, 0] += 1e-6
        with pytest.raises(MdpValidationError, match=r"action 0, state 1.*sums to"):
            validate(spec)

    def test_row_sum_tolerance_boundary(self):
        # a 1e-13 defect is inside the 1e-12 acceptance band
        spec = _toy_spec()
        spec.transitions = spec.transitions.copy()
        spec.transitions[0, 0, 0] += 1e-13
        validate(spec)

    def test_renormalize_is_explicit(self):
        spec = _toy_spec()
        spec.transitions = 2.0 * spec.transitions
        with pytest.raises(MdpValidationError):
            validate(spec)
        mdp = validate(spec, renormalize=True)
        assert np.allclose(mdp.transitions.sum(axis=2), 1.0, atol=1e-12)

    def test_renormalize_rejects_zero_row(self):
        spec = _toy_spec()
        spec.transitions = spec.transitions.copy()
        spec.transitions[1, 2, :] = 0.0
        with pytest.raises(MdpValidationError, match="zero mass"):
            validate(spec, renormalize=True)

    def test_arrays_read_only(self, toy):
        with pytest.raises(ValueError):
            toy.transitions[0, 0, 0] = 0.5
        with pytest.raises(ValueError):
            toy.rewards[0, 0] = 2.0

    def test_random_rows_stochastic(self):
        gen = rng(1)
        for _ in range(200):
            mdp = random_mdp(gen, num_states=int(gen.integers(1, 6)),
                             num_actions=int(gen.integers(1, 5)))
            sums = stack_transitions(mdp).sum(axis=1)
            assert np.abs(sums - 1.0).max() <= 1e-12


class TestIndexing:
    @given(st.data())
    def test_index_bijection(self, data):
        s_count = data.draw(st.integers(1, 40))
        a_count = data.draw(st.integers(1, 40))
        s = data.draw(st.integers(0, s_count - 1))
        a = data.draw(st.integers(0, a_count - 1))
        i = q_index(s, a, s_count)
        assert 0 <= i < s_count * a_count
        assert q_split(i, s_count) == (s, a)

    @given(st.integers(1, 12), st.integers(1, 12))
    def test_index_covers_range(self, s_count, a_count):
        seen = {q_index(s, a, s_count) for s in range(s_count) for a in range(a_count)}
        assert seen == set(range(s_count * a_count))

    def test_table_round_trip(self):
        gen = rng(2)
        for _ in range(200):
            s_count, a_count = int(gen.integers(1, 7)), int(gen.integers(1, 7))
            table = gen.normal(size=(s_count, a_count))
            q = table_to_q(table)
            assert q.shape == (s_count * a_count,)
            for s in range(s_count):
                for a in range(a_count):
                    assert q[q_index(s, a, s_count)] == table[s, a]
            assert np.array_equal(q_to_table(q, s_count, a_count), table)

    def test_q_to_table_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="length 6"):
            q_to_table(np.zeros(5), 3, 2)


class TestStackAndRewards:
    def test_stack_first_block_is_action_zero(self, toy):
        stacked = stack_transitions(toy)
        assert stacked.shape == (6, 3)
        assert np.array_equal(stacked[:3], toy.transitions[0])
        assert np.array_equal(stacked[3:], toy.transitions[1])
        assert stacked[0, 0] == 0.7 and stacked[0, 1] == 0.2 and stacked[0, 2] == 0.1

    def test_one_state_one_action(self):
        spec = MdpSpec("unit", 0.5, 1, 1, np.ones((1, 1, 1)), np.ones((1, 1)))
        mdp = validate(spec)
        assert np.array_equal(stack_transitions(mdp), [[1.0]])

    def test_rewards_vector_layout(self, toy):
        from qtube.mdp import rewards_vector

        r = rewards_vector(toy)
        for s in range(3):
            for a in range(2):
                assert r[q_index(s, a, 3)] == toy.rewards[s, a]


class TestGreedy:
    def test_all_equal_picks_action_zero(self):
        pol = greedy_policy(np.zeros(6), 3, 2)
        assert np.array_equal(pol, [0, 0, 0])

    def test_lowest_index_on_exact_tie(self):
        q = table_to_q(np.array([[1.0, 1.0, 0.5], [0.2, 0.9, 0.9]]))
        assert np.array_equal(greedy_policy(q, 2, 3), [0, 1])

    def test_tie_tol_widens_then_prefers_lowest(self):
        q = table_to_q(np.array([[1.0, 1.05]]))
        assert np.array_equal(greedy_policy(q, 1, 2), [1])
        assert np.array_equal(greedy_policy(q, 1, 2, tie_tol=0.1), [0])

    def test_shift_invariance(self):
        gen = rng(3)
        for _ in range(200):
            s_count, a_count = int(gen.integers(1, 6)), int(gen.integers(1, 6))
            q = gen.normal(size=s_count * a_count)
            c = float(gen.normal() * 10)
            assert np.array_equal(
                greedy_policy(q, s_count, a_count),
                greedy_policy(q + c, s_count, a_count),
            )

    @given(c=st.floats(-1e6, 1e6))
    def test_shift_invariance_toy(self, toy_report, c):
        base = greedy_policy(toy_report.q_star, 3, 2)
        assert np.array_equal(base, greedy_policy(toy_report.q_star + c, 3, 2))


class TestPolicyOperators:
    def test_as_stochastic_one_hot(self):
        mat = as_stochastic(np.array([1, 0, 2]), 3)
        assert np.array_equal(mat, [[0, 1, 0], [1, 0, 0], [0, 0, 1]])

    def test_as_stochastic_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"policy\[1\]"):
            as_stochastic(np.array([0, 5]), 2)

    def test_action_matrix_structure(self, toy):
        gen = rng(4)
        for _ in range(50):
            raw = gen.random((3, 2))
            pi = raw / raw.sum(axis=1, keepdims=True)
            mat = action_transition_matrix(pi, 3, 2)
            assert mat.shape == (3, 6)
            assert np.abs(mat.sum(axis=1) - 1.0).max() <= 1e-12
            for s in range(3):
                for a in range(2):
                    assert mat[s, q_index(s, a, 3)] == pi[s, a]
                off = [i for i in range(6) if q_split(i, 3)[0] != s]
                assert np.all(mat[s, off] == 0.0)

    def test_action_matrix_uniform_policy(self):
        mat = action_transition_matrix(np.full((2, 2), 0.5), 2, 2)
        assert sorted(mat[0]) == [0.0, 0.0, 0.5, 0.5]

    def test_action_matrix_optimal_selects_block(self, toy, toy_report):
        mat = action_transition_matrix(toy_report.pi_star, 3, 2)
        # the unique optimal policy is all-zeros: identity on the action-0 block
        assert np.array_equal(mat[:, :3], np.eye(3))
        assert np.all(mat[:, 3:] == 0.0)

    def test_policy_kernel_row_stochastic_all_policies(self, toy):
        for pol in enumerate_policies(toy):
            b = policy_kernel(toy, pol)
            assert b.shape == (6, 6)
            sums = b.sum(axis=1)
            assert abs(sums.max() - 1.0) <= 1e-12 and abs(sums.min() - 1.0) <= 1e-12
            # sup norm of the error map is exactly gamma
            assert abs(np.abs(toy.gamma * b).sum(axis=1).max() - toy.gamma) <= 1e-12

    def test_policy_kernel_random(self):
        gen = rng(5)
        for _ in range(200):
            mdp = random_mdp(gen, num_states=int(gen.integers(1, 5)),
                             num_actions=int(gen.integers(1, 4)))
            pol = gen.integers(0, mdp.num_actions, size=mdp.num_states)
            b = policy_kernel(mdp, pol)
            assert np.abs(b @ np.ones(mdp.num_pairs) - 1.0).max() <= 1e-12
            assert np.abs(np.abs(mdp.gamma * b).sum(axis=1) - mdp.gamma).max() <= 1e-12

    def test_state_kernel_matches_direct(self):
        gen = rng(6)
        for _ in range(100):
            mdp = random_mdp(gen, num_states=4, num_actions=3)
            pol = gen.integers(0, 3, size=4)
            p_pi = state_kernel(mdp, pol)
            for s in range(4):
                assert np.allclose(p_pi[s], mdp.transitions[pol[s], s], atol=1e-15)

    def test_kernel_rejects_bad_policy_shapes(self, toy):
        with pytest.raises(ValueError, match="policy shape"):
            policy_kernel(toy, np.zeros(4, dtype=int))
        with pytest.raises(ValueError, match="row 0 sums"):
            policy_kernel(toy, np.array([[0.7, 0.2], [0.5, 0.5], [1.0, 0.0]]))


class TestEnumeration:
    def test_toy_enumeration_order(self, toy):
        pols = enumerate_policies(toy)
        assert len(pols) == 8
        assert np.array_equal(pols[0], [0, 0, 0])
        assert np.array_equal(pols[-1], [1, 1, 1])

    def test_single_state(self):
        spec = MdpSpec("row", 0.9, 1, 3, np.ones((3, 1, 1)), np.zeros((1, 3)))
        assert len(enumerate_policies(validate(spec))) == 3

    def test_cap_exceeded_reports_count(self):
        gen = rng(7)
        mdp = random_mdp(gen, num_states=20, num_actions=4)
        with pytest.raises(ValueError, match=str(4**20)):
            enumerate_policies(mdp, cap=10**6)
