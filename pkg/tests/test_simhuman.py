import itertools

import numpy as np
import pytest

from safealt.errors import ConfigError
from safealt.filtering import FilterDecision, FilterOutcome
from safealt.similarity import FEATURE_NAMES, GoalCatalog, IntentProfile, \
    load_intents, packaged_data_path
from safealt.simhuman import (
    AlignmentCase,
    SimHuman,
    acceptable_set,
    alignment_eval,
    answer_triplet,
    gt_distance,
    gt_ranking,
    load_cases,
    make_triplets,
    save_cases,
    simulated_cases,
)
from safealt.world import GoalValue, State


@pytest.fixture(scope="module")
def catalog() -> GoalCatalog:
    return GoalCatalog.load(packaged_data_path("catalog.json"))


@pytest.fixture(scope="module")
def intents():
    return load_intents(packaged_data_path("intents.json"))


def rgb_intent() -> IntentProfile:
    w = np.zeros(20)
    w[0:3] = 1.0
    return IntentProfile("rgb", "sort by color", w)


class TestGtDistance:
    def test_identity(self, catalog):
        h = SimHuman(rgb_intent())
        assert gt_distance(h, catalog, 3, 3) == 0.0

    def test_masked_features_ignored(self, catalog):
        # intent weighting only material: entries sharing material are distance 0
        w = np.zeros(20)
        w[FEATURE_NAMES.index("mat_stoneware")] = 1.0
        h = SimHuman(IntentProfile("mat", "by material", w))
        assert gt_distance(h, catalog, 2, 3) == 0.0  # both stoneware bowls

    def test_unit_weight_rgb_arithmetic(self, catalog):
        # pure red vs black under unit RGB weights has distance 1
        w = np.zeros(20)
        w[0:3] = 1.0
        h = SimHuman(IntentProfile("rgb", "c", w))
        e0 = catalog.entries[0].features.copy()
        red = e0.copy(); red[0:3] = (1.0, 0.0, 0.0)
        black = e0.copy(); black[0:3] = (0.0, 0.0, 0.0)
        cat = GoalCatalog(entries=[
            catalog.entries[0].__class__(0, "a", "a", red, 0.0),
            catalog.entries[0].__class__(1, "b", "b", black, 1.0),
        ])
        assert gt_distance(h, cat, 0, 1) == pytest.approx(1.0)

    def test_pseudometric_properties(self, catalog, intents):
        rng = np.random.default_rng(0)
        for intent in intents.values():
            h = SimHuman(intent)
            ids = catalog.ids()
            for a, b in rng.choice(ids, (30, 2)):
                assert gt_distance(h, catalog, int(a), int(b)) == pytest.approx(
                    gt_distance(h, catalog, int(b), int(a)))
            for a, b, c in rng.choice(ids, (30, 3)):
                dab = gt_distance(h, catalog, int(a), int(b))
                dbc = gt_distance(h, catalog, int(b), int(c))
                dac = gt_distance(h, catalog, int(a), int(c))
                assert dac <= dab + dbc + 1e-12


class TestAnswerTriplet:
    def test_identical_pair_selected(self, catalog):
        # red and brown bowls share material-only features; craft an intent
        # where they coincide exactly
        w = np.zeros(20)
        w[FEATURE_NAMES.index("mat_stoneware")] = 1.0
        h = SimHuman(IntentProfile("mat", "m", w))
        pair, odd = answer_triplet(h, catalog, (2, 3, 4))
        assert pair == (2, 3) and odd == 4

    def test_rgb_intent_groups_reds(self, catalog):
        h = SimHuman(rgb_intent())
        pair, odd = answer_triplet(h, catalog, (0, 2, 1))  # red mug, red bowl, white mug
        assert pair == (0, 2)
        assert odd == 1

    def test_invariant_to_input_order(self, catalog, intents):
        h = SimHuman(intents["formal_wine"])
        for perm in itertools.permutations((4, 6, 9)):
            assert answer_triplet(h, catalog, perm) == answer_triplet(h, catalog, (4, 6, 9))

    def test_equidistant_breaks_lexicographically(self, catalog):
        w = np.zeros(20)
        w[FEATURE_NAMES.index("mat_other")] = 1.0  # nobody has it: all ties
        h = SimHuman(IntentProfile("null-ish", "n", w))
        pair, odd = answer_triplet(h, catalog, (7, 3, 5))
        assert pair == (3, 5) and odd == 7

    def test_distinct_goals_required(self, catalog):
        h = SimHuman(rgb_intent())
        with pytest.raises(ConfigError):
            answer_triplet(h, catalog, (1, 1, 2))


class TestGtRanking:
    def test_permutation_of_others(self, catalog, intents):
        for intent in intents.values():
            h = SimHuman(intent)
            ranked = gt_ranking(h, catalog, 0)
            assert sorted(ranked) == [g for g in catalog.ids() if g != 0]
            assert len(ranked) == 9

    def test_ascending_distance(self, catalog, intents):
        h = SimHuman(intents["color_sort"])
        ranked = gt_ranking(h, catalog, 0)
        dists = [gt_distance(h, catalog, 0, g) for g in ranked]
        assert dists == sorted(dists)

    def test_make_triplets_labels_consistent(self, catalog, intents):
        h = SimHuman(intents["microwave_soup"])
        for a, p, n in make_triplets(h, catalog, 100, seed=1):
            assert gt_distance(h, catalog, a, p) <= min(
                gt_distance(h, catalog, a, n), gt_distance(h, catalog, p, n)) + 1e-12


class TestAcceptableSets:
    def test_threshold_is_second_neighbor(self, catalog, intents):
        h = SimHuman(intents["color_sort"])
        acc = acceptable_set(h, catalog, 0)
        ranked = gt_ranking(h, catalog, 0)
        assert ranked[0] in acc and ranked[1] in acc
        assert 0 not in acc

    def test_case_excludes_gh(self):
        with pytest.raises(ConfigError):
            AlignmentCase(1, "i", (1, 2))

    def test_fixture_round_trip(self, catalog, intents, tmp_path):
        h = SimHuman(intents["formal_wine"])
        cases = simulated_cases(h, catalog, goal_ids=[4, 5])
        path = tmp_path / "cases.json"
        save_cases(cases, path)
        loaded = load_cases(path)
        assert [(c.g_h, c.acceptable) for c in loaded] == \
            [(c.g_h, c.acceptable) for c in cases]


def scripted_filter(decision_map):
    """filter_runner stub: (g_h) -> scripted decision."""

    def runner(state, gh, intent_id, seed):
        kind, goal = decision_map[gh]
        if kind == "safe":
            return FilterDecision(FilterOutcome.ORIGINAL_SAFE,
                                  GoalValue(goal_id=gh), -1.0, 0.0, 0)
        if kind == "alt":
            return FilterDecision(FilterOutcome.ALTERNATIVE,
                                  GoalValue(goal_id=goal), -0.5, 1.0, 3)
        return FilterDecision(FilterOutcome.NO_SAFE_ALTERNATIVE, None, None, None, 3)

    return runner


class TestAlignmentEval:
    def test_always_safe_scores_100(self):
        cases = [AlignmentCase(0, "i", ()), AlignmentCase(1, "i", (2,))]
        runner = scripted_filter({0: ("safe", None), 1: ("safe", None)})
        states = [State(0, 0, 0)] * 5
        result = alignment_eval(cases, runner, states, seed=0)
        assert result.mean == 100.0
        assert result.alt_mean is None  # no alternative was ever required

    def test_empty_acceptable_and_unsafe_scores_0(self):
        cases = [AlignmentCase(0, "i", ())]
        runner = scripted_filter({0: ("alt", 3)})
        result = alignment_eval(cases, runner, [State(0, 0, 0)] * 4, seed=0)
        assert result.per_case[0] == 0.0
        assert result.per_case_alt[0] == 0.0

    def test_acceptable_alternative_counts(self):
        cases = [AlignmentCase(0, "i", (3,)), AlignmentCase(1, "i", (2,))]
        runner = scripted_filter({0: ("alt", 3), 1: ("alt", 4)})
        result = alignment_eval(cases, runner, [State(0, 0, 0)] * 4, seed=0)
        assert result.per_case[0] == 100.0
        assert result.per_case[1] == 0.0
        assert result.mean == 50.0
        assert result.alt_mean == 50.0

    def test_deterministic_given_seed(self):
        cases = [AlignmentCase(0, "i", (3,))]
        runner = scripted_filter({0: ("alt", 3)})
        states = [State(0, 0, 0)] * 3
        a = alignment_eval(cases, runner, states, seed=5)
        b = alignment_eval(cases, runner, states, seed=5)
        assert a.per_case == b.per_case and a.n_states == b.n_states
