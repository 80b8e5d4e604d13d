import numpy as np
import pytest

from featforge.agents import (
    AgentConfig,
    CascadeAgent,
    DuelingNets,
    ReplayMemory,
    Transition,
    ac_select,
    ac_update,
    compute_rewards,
    double_q_target,
    dueling_q_values,
    epsilon_at,
    q_update_double_dueling,
    q_update_vanilla,
    score_candidates,
    select_epsilon_greedy,
)
from featforge.nnet import AdamState, forward, init_net
from featforge.state_rep import StateVector


def sv(*values):
    return StateVector(values=np.array(values, dtype=float), method="test")


def make_transition(reward=1.0, action_index=0):
    cands = (sv(1.0, 0.0), sv(0.0, 1.0))
    return Transition(
        state=sv(0.5),
        action_rep=cands[action_index],
        action_index=action_index,
        candidates=cands,
        reward=reward,
        next_state=sv(-0.5),
        next_candidates=cands,
    )


def linear_net(weights, bias=0.0):
    """Single linear layer with explicit weights (input width = len(weights))."""
    net = init_net((len(weights), 1), ("linear",), seed=0)
    net.weights[0][:, 0] = np.asarray(weights, dtype=float)
    net.biases[0][0] = bias
    return net


class TestAgentConfig:
    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            AgentConfig(gamma=0.0)
        with pytest.raises(ValueError):
            AgentConfig(gamma=1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            AgentConfig(kind="sarsa")


class TestEpsilonSchedule:
    def test_formula(self):
        cfg = AgentConfig()
        for t in (0, 1, 5, 20):
            assert abs(epsilon_at(t, cfg) - max(0.05, 0.9 * 0.95**t)) < 1e-12

    def test_monotone_and_floored(self):
        cfg = AgentConfig()
        values = [epsilon_at(t, cfg) for t in range(200)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert values[-1] == 0.05


class TestComputeRewards:
    def test_substitution(self):
        assert compute_rewards(0.2, 0.5, 0.7) == (0.2, pytest.approx(0.3), pytest.approx(1.0))

    def test_no_change(self):
        r1, r_op, r2 = compute_rewards(0.4, 0.4, 0.6)
        assert (r1, r_op, r2) == (0.4, 0.0, 0.6)

    def test_negative_allowed(self):
        _, r_op, _ = compute_rewards(0.5, 0.4, 0.0)
        assert abs(r_op + 0.1) < 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            compute_rewards(float("nan"), 0.0, 0.0)


class TestReplayMemory:
    def test_ring_eviction(self):
        mem = ReplayMemory(32, 8, np.random.default_rng(0))
        transitions = [make_transition(reward=float(i)) for i in range(33)]
        for t in transitions:
            mem.push(t)
        assert len(mem) == 32
        stored_rewards = {t.reward for t in mem._buf}
        assert 0.0 not in stored_rewards
        assert 32.0 in stored_rewards

    def test_warmup_returns_none(self):
        mem = ReplayMemory(32, 8, np.random.default_rng(0))
        for i in range(5):
            mem.push(make_transition(reward=float(i)))
        assert mem.sample() is None

    def test_seeded_sampling(self):
        a = ReplayMemory(32, 4, np.random.default_rng(3))
        b = ReplayMemory(32, 4, np.random.default_rng(3))
        for i in range(10):
            t = make_transition(reward=float(i))
            a.push(t)
            b.push(t)
        assert [t.reward for t in a.sample()] == [t.reward for t in b.sample()]

    def test_sample_without_replacement(self):
        mem = ReplayMemory(32, 8, np.random.default_rng(1))
        for i in range(8):
            mem.push(make_transition(reward=float(i)))
        batch = mem.sample()
        assert sorted(t.reward for t in batch) == [float(i) for i in range(8)]


class TestTransition:
    def test_empty_next_candidates(self):
        with pytest.raises(ValueError):
            Transition(
                state=sv(0.0),
                action_rep=sv(1.0),
                action_index=0,
                candidates=(sv(1.0),),
                reward=0.0,
                next_state=sv(0.0),
                next_candidates=(),
            )

    def test_nonfinite_reward(self):
        with pytest.raises(ValueError):
            make_transition(reward=float("inf"))


class TestScoreCandidates:
    def test_single(self):
        net = init_net((3, 4, 1), ("relu", "linear"), seed=0)
        scores = score_candidates(net, sv(0.1), [sv(1.0, 0.0)])
        assert scores.shape == (1,)

    def test_identical_candidates_identical_scores(self):
        net = init_net((3, 4, 1), ("relu", "linear"), seed=1)
        scores = score_candidates(net, sv(0.1), [sv(1.0, 0.0), sv(1.0, 0.0)])
        assert scores[0] == scores[1]

    def test_zero_weights_give_bias(self):
        net = linear_net([0.0, 0.0, 0.0], bias=0.25)
        scores = score_candidates(net, sv(0.3), [sv(1.0, 0.0), sv(0.0, 1.0)])
        assert np.allclose(scores, 0.25)

    def test_empty_rejected(self):
        net = init_net((3, 1), ("linear",), seed=0)
        with pytest.raises(ValueError):
            score_candidates(net, sv(0.1), [])


class TestSelectEpsilonGreedy:
    def test_greedy(self):
        rng = np.random.default_rng(0)
        assert select_epsilon_greedy([0.1, 0.9, 0.5], 0.0, rng) == 1

    def test_tie_lowest_index(self):
        rng = np.random.default_rng(0)
        assert select_epsilon_greedy([1.0, 1.0, 0.0], 0.0, rng) == 0

    def test_uniform_when_epsilon_one(self):
        rng = np.random.default_rng(42)
        n, draws = 4, 10000
        counts = np.zeros(n)
        for _ in range(draws):
            counts[select_epsilon_greedy(np.zeros(n), 1.0, rng)] += 1
        p = 1.0 / n
        sigma = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) < 3 * sigma)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            select_epsilon_greedy([1.0], 1.5, np.random.default_rng(0))


class TestQUpdateVanilla:
    def test_loss_matches_hand_computation(self):
        # linear net: Q(s, c) = 0.1*s + 0.2*c1 + 0.3*c2 + 0.05
        net = linear_net([0.1, 0.2, 0.3], bias=0.05)
        cfg = AgentConfig(gamma=0.9)
        t = make_transition(reward=1.0, action_index=0)
        q_sa = 0.1 * 0.5 + 0.2 * 1.0 + 0.05
        next_q = [0.1 * -0.5 + 0.2 + 0.05, 0.1 * -0.5 + 0.3 + 0.05]
        target = 1.0 + 0.9 * max(next_q)
        expected_loss = (q_sa - target) ** 2
        loss = q_update_vanilla([t], net, AdamState(), cfg)
        assert abs(loss - expected_loss) < 1e-12

    def test_tiny_gamma_target_is_reward(self):
        net = linear_net([0.1, 0.2, 0.3], bias=0.05)
        cfg = AgentConfig(gamma=1e-12)
        t = make_transition(reward=2.0, action_index=1)
        q_sa = 0.1 * 0.5 + 0.3 * 1.0 + 0.05
        loss = q_update_vanilla([t], net, AdamState(), cfg)
        assert abs(loss - (q_sa - 2.0) ** 2) < 1e-9

    def test_repeated_updates_converge_10x(self):
        net = init_net((3, 8, 1), ("relu", "linear"), seed=4)
        cfg = AgentConfig(gamma=0.9)
        adam = AdamState(learning_rate=0.01)
        t = make_transition(reward=1.0)

        def residual():
            next_q = score_candidates(net, t.next_state, t.next_candidates)
            target = t.reward + cfg.gamma * float(next_q.max())
            out, _ = forward(net, np.concatenate([t.state.values, t.action_rep.values]))
            return abs(float(out[0]) - target)

        initial = residual()
        for _ in range(100):
            q_update_vanilla([t], net, adam, cfg)
        assert residual() <= initial / 10.0

    def test_empty_batch(self):
        net = init_net((3, 1), ("linear",), seed=0)
        with pytest.raises(ValueError):
            q_update_vanilla([], net, AdamState(), AgentConfig())


class TestDuelingDoubleQ:
    def handcrafted_nets(self):
        # V nets read the 1-wide state; A nets read state + 2-wide candidate.
        online = DuelingNets(
            v_net=linear_net([0.0], bias=0.0),
            a_net=linear_net([0.0, 0.0, 1.0], bias=0.0),  # adv = [0, 1]
        )
        target = DuelingNets(
            v_net=linear_net([0.0], bias=0.55),
            a_net=linear_net([0.0, 0.35, -0.35], bias=0.0),  # adv = [0.35, -0.35]
        )
        return online, target

    def test_advantage_shift_invariance(self):
        online, _ = self.handcrafted_nets()
        state = sv(0.0)
        cands = (sv(1.0, 0.0), sv(0.0, 1.0))
        q = dueling_q_values(online.v_net, online.a_net, state, cands)
        online.a_net.biases[0][0] += 5.0
        q_shift = dueling_q_values(online.v_net, online.a_net, state, cands)
        assert np.max(np.abs(q - q_shift)) < 1e-12

    def test_double_q_decoupling(self):
        online, target = self.handcrafted_nets()
        t = make_transition(reward=1.0, action_index=0)
        # online Q over next candidates = [-0.5, 0.5] -> picks candidate 1;
        # target Q = [0.9, 0.2] -> evaluates the ONLINE choice at 0.2
        q_online = dueling_q_values(online.v_net, online.a_net, t.next_state, t.next_candidates)
        assert int(np.argmax(q_online)) == 1
        q_target = dueling_q_values(target.v_net, target.a_net, t.next_state, t.next_candidates)
        assert abs(q_target[0] - 0.9) < 1e-12 and abs(q_target[1] - 0.2) < 1e-12
        y = double_q_target(t, online, target, gamma=0.9)
        assert abs(y - (1.0 + 0.9 * 0.2)) < 1e-12
        assert abs(y - (1.0 + 0.9 * 0.9)) > 0.1  # not the target net's own max

    def test_update_runs_and_reduces_residual(self):
        cfg = AgentConfig(kind="ddqn_dueling", gamma=0.9)
        online = DuelingNets(
            v_net=init_net((1, 8, 1), ("relu", "linear"), seed=0),
            a_net=init_net((3, 8, 1), ("relu", "linear"), seed=1),
        )
        target = DuelingNets(v_net=online.v_net.copy(), a_net=online.a_net.copy())
        adam_v, adam_a = AdamState(), AdamState()
        t = make_transition(reward=1.0)
        first = q_update_double_dueling([t], online, target, adam_v, adam_a, cfg)
        for _ in range(60):
            last = q_update_double_dueling([t], online, target, adam_v, adam_a, cfg)
        assert last < first

    def test_architecture_mismatch(self):
        cfg = AgentConfig(kind="ddqn_dueling")
        online = DuelingNets(
            v_net=init_net((1, 4, 1), ("relu", "linear"), seed=0),
            a_net=init_net((3, 4, 1), ("relu", "linear"), seed=1),
        )
        target = DuelingNets(
            v_net=init_net((2, 4, 1), ("relu", "linear"), seed=0),
            a_net=init_net((3, 4, 1), ("relu", "linear"), seed=1),
        )
        with pytest.raises(ValueError):
            q_update_double_dueling([make_transition()], online, target, AdamState(), AdamState(), cfg)

    def test_sync_makes_nets_identical(self):
        agent = CascadeAgent(1, 2, AgentConfig(kind="ddqn_dueling", batch_size=1, target_sync_every=1))
        agent.observe(make_transition())
        state = sv(0.2)
        cands = (sv(1.0, 0.0), sv(0.0, 1.0))
        q_on = dueling_q_values(agent.online.v_net, agent.online.a_net, state, cands)
        q_tg = dueling_q_values(agent.target.v_net, agent.target.a_net, state, cands)
        assert np.max(np.abs(q_on - q_tg)) < 1e-12


class TestActorCritic:
    def test_select_probabilities(self):
        actor = init_net((3, 4, 1), ("relu", "linear"), seed=2)
        idx, probs = ac_select(actor, sv(0.1), [sv(1.0, 0.0), sv(0.0, 1.0)], np.random.default_rng(0))
        assert 0 <= idx < 2
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_equal_logits_uniform(self):
        actor = linear_net([0.0, 0.0, 0.0], bias=0.7)
        cands = [sv(1.0, 0.0), sv(0.0, 1.0), sv(1.0, 1.0), sv(0.5, 0.5)]
        _, probs = ac_select(actor, sv(0.0), cands, np.random.default_rng(1))
        assert np.allclose(probs, 0.25)

    def test_sampling_frequencies(self):
        # logits ln(0.7), ln(0.3) -> pi = (0.7, 0.3)
        actor = linear_net([0.0, np.log(0.7), np.log(0.3)], bias=0.0)
        cands = [sv(1.0, 0.0), sv(0.0, 1.0)]
        rng = np.random.default_rng(123)
        draws = 10000
        hits = sum(ac_select(actor, sv(0.0), cands, rng)[0] == 0 for _ in range(draws))
        sigma = np.sqrt(draws * 0.7 * 0.3)
        assert abs(hits - draws * 0.7) < 3 * sigma

    def test_delta_substitution(self):
        # zero-weight critic: V = 0 everywhere -> delta = reward; critic loss = delta^2
        actor = init_net((3, 4, 1), ("relu", "linear"), seed=3)
        critic = linear_net([0.0], bias=0.0)
        t = make_transition(reward=1.0)
        critic_loss, _ = ac_update(t, actor, critic, AdamState(), AdamState(), AgentConfig(gamma=0.9))
        assert abs(critic_loss - 1.0) < 1e-12

    def test_uniform_entropy_in_objective(self):
        # uniform pi over 2 candidates: objective = delta*ln(1/2) + beta*ln(2)
        actor = linear_net([0.0, 0.0, 0.0], bias=0.0)
        critic = linear_net([0.0], bias=0.0)
        t = make_transition(reward=1.0)
        cfg = AgentConfig(gamma=0.9, entropy_beta=0.01)
        _, objective = ac_update(t, actor, critic, AdamState(), AdamState(), cfg)
        expected = 1.0 * np.log(0.5) + 0.01 * np.log(2.0)
        assert abs(objective - expected) < 1e-12

    def test_positive_delta_increases_action_probability(self):
        actor = init_net((3, 8, 1), ("relu", "linear"), seed=5)
        critic = linear_net([0.0], bias=0.0)
        t = make_transition(reward=2.0, action_index=1)

        def prob_of_action():
            scores = score_candidates(actor, t.state, t.candidates)
            from featforge.nnet import softmax

            return softmax(scores)[t.action_index]

        before = prob_of_action()
        ac_update(t, actor, critic, AdamState(), AdamState(), AgentConfig(gamma=0.9))
        assert prob_of_action() > before


class TestCascadeAgent:
    @pytest.mark.parametrize("kind", ["dqn", "ddqn_dueling", "actor_critic"])
    def test_select_and_observe(self, kind):
        cfg = AgentConfig(kind=kind, batch_size=2, seed=0)
        agent = CascadeAgent(1, 2, cfg)
        cands = (sv(1.0, 0.0), sv(0.0, 1.0))
        idx, prob = agent.select(sv(0.1), cands, epsilon=0.5)
        assert 0 <= idx < 2
        assert 0.0 < prob <= 1.0
        for i in range(4):
            agent.observe(make_transition(reward=float(i)))

    def test_dqn_warmup(self):
        agent = CascadeAgent(1, 2, AgentConfig(kind="dqn", batch_size=8))
        assert agent.observe(make_transition()) is None

    def test_deterministic_selection_sequence(self):
        def run():
            agent = CascadeAgent(1, 2, AgentConfig(kind="dqn", seed=11))
            cands = (sv(1.0, 0.0), sv(0.0, 1.0))
            return [agent.select(sv(0.1 * i), cands, epsilon=0.5)[0] for i in range(20)]

        assert run() == run()

    def test_ddqn_target_sync_counter(self):
        cfg = AgentConfig(kind="ddqn_dueling", batch_size=1, target_sync_every=3)
        agent = CascadeAgent(1, 2, cfg)
        for i in range(3):
            agent.observe(make_transition(reward=float(i)))
        q_on = dueling_q_values(agent.online.v_net, agent.online.a_net, sv(0.3), (sv(1.0, 0.0), sv(0.0, 1.0)))
        q_tg = dueling_q_values(agent.target.v_net, agent.target.a_net, sv(0.3), (sv(1.0, 0.0), sv(0.0, 1.0)))
        assert np.max(np.abs(q_on - q_tg)) < 1e-12
