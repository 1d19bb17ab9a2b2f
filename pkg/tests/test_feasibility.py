import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from iacsit.channel_model import AntennaConfig, SubIC, parse_config
from iacsit.feasibility import (
    Classification,
    EnumerationGuardError,
    FeasibilityReport,
    is_feasible,
    is_feasible_bruteforce,
    n_eq,
    n_var,
    scan,
    scan_orders,
    slack,
    smallest_tight_subic,
)

from conftest import SUPER3, TIGHT5, configs


def subsets(K):
    users = range(1, K + 1)
    return [frozenset(c) for r in range(K + 1) for c in itertools.combinations(users, r)]


def oracle_feasible(cfg):
    """Literal reading of the properness condition, with no shared code."""
    for R in subsets(cfg.K):
        for T in subsets(cfg.K):
            nv = sum(cfg.N[i - 1] - 1 for i in R) + sum(cfg.M[j - 1] - 1 for j in T)
            ne = sum(1 for i in R for j in T if i != j)
            if nv < ne:
                return False
    return True


class TestCounts:
    def test_examples(self):
        c5 = parse_config(TIGHT5)
        assert n_eq(parse_config("[(2,2)^3]"), SubIC.full(3)) == 6
        assert n_eq(c5, SubIC({1}, {1})) == 0
        assert n_eq(c5, SubIC({1, 2}, {4, 5})) == 4
        # ({1,2},{4,5}): (2-1)+(2-1) + (2-1)+(2-1) = 4 variables, tight
        assert n_var(c5, SubIC({1, 2}, {4, 5})) == 4
        assert slack(c5, SubIC.full(5)) == 0

    def test_empty(self):
        c = parse_config("[(3,3)^2]")
        assert n_var(c, SubIC()) == 0 and n_eq(c, SubIC()) == 0


class TestVerdicts:
    @pytest.mark.parametrize(
        "text, cls",
        [
            ("[(2,2)^3]", Classification.TIGHT),
            ("[(2,2)^4]", Classification.INFEASIBLE),
            ("[(1,1).(2,2).(3,3)]", Classification.TIGHT),
            (TIGHT5, Classification.TIGHT),
            (SUPER3, Classification.SUPER),
            # sums to 20 = K(K+1), so tight rather than super
            ("[(2,2).(2,2).(2,2).(4,4)]", Classification.TIGHT),
            ("[(2,2)^3.(5,5)]", Classification.SUPER),
            ("[(1,1)]", Classification.TIGHT),
            ("[(1,1)^2]", Classification.INFEASIBLE),
        ],
    )
    def test_classification(self, text, cls):
        c = parse_config(text)
        assert is_feasible(c).classification is cls
        assert is_feasible_bruteforce(c).classification is cls

    def test_infeasible_witness(self):
        c = parse_config("[(2,2)^4]")
        rep = is_feasible(c)
        assert not rep.feasible
        nv, ne = rep.witness_counts
        assert nv < ne and (nv, ne) == (n_var(c, rep.witness), n_eq(c, rep.witness))
        bf = is_feasible_bruteforce(c)
        # first violation in (rx_mask, tx_mask) order: RX {1,2,3} against TX {1,2,3} is
        # tight, so the earliest violating pair involves a fourth node
        assert slack(c, bf.witness) < 0
        for r in range(bf.witness.rx_mask + 1):
            for t in range(1 << 4):
                if (r, t) >= (bf.witness.rx_mask, bf.witness.tx_mask):
                    break
                assert slack(c, SubIC.from_masks(r, t)) >= 0

    def test_embedded_tight_witness(self):
        rep = is_feasible(parse_config("[(2,2).(2,2).(2,2).(4,4)]"))
        assert rep.witness == SubIC({1, 2, 3}, {1, 2, 3})
        assert rep.witness_counts == (6, 6)

    def test_guard(self):
        with pytest.raises(EnumerationGuardError):
            is_feasible_bruteforce(AntennaConfig((2,) * 11, (2,) * 11))

    def test_report_round_trip(self):
        for text in ("[(2,2)^4]", TIGHT5, "[(3,3)^2]"):
            rep = is_feasible(parse_config(text))
            assert FeasibilityReport.from_dict(rep.to_dict()) == rep


class TestScan:
    def test_orders_five_user_example(self):
        rx, tx = scan_orders(parse_config(TIGHT5))
        # TX by M ascending, ties by larger paired N first
        assert tx == [5, 4, 1, 2, 3]
        # RX by N ascending, ties by larger paired M first
        assert rx == [2, 1, 3, 4, 5]

    def test_orders_tied_pairs_reversed(self):
        rx, tx = scan_orders(parse_config("[(2,2)^3]"))
        assert tx == [1, 2, 3]
        assert rx == [3, 2, 1]

    @pytest.mark.parametrize(
        "anchor, expect",
        [
            (1, SubIC({1, 2, 3}, {1, 4, 5})),
            (2, SubIC({1, 2, 3, 4}, {1, 2, 4, 5})),
            (3, SubIC.full(5)),
            (4, SubIC({1, 2}, {4, 5})),
            (5, SubIC({1, 2}, {4, 5})),
        ],
    )
    def test_smallest_tight_five_user_example(self, anchor, expect):
        assert smallest_tight_subic(parse_config(TIGHT5), anchor_tx=anchor) == expect

    def test_homogeneous_tight_has_no_strict_sub_ic(self):
        assert smallest_tight_subic(parse_config("[(2,2)^3]"), anchor_tx=1) == SubIC.full(3)

    def test_one_anchor_only(self):
        with pytest.raises(ValueError):
            list(scan(parse_config("[(2,2)^3]"), anchor_tx=1, anchor_rx=1))

    @given(configs(k_max=5))
    def test_incremental_slack_matches_direct_count(self, cfg):
        for anchor in [None, *cfg.users]:
            for s, sl in scan(cfg, anchor_tx=anchor, finish_rx=True):
                assert sl == slack(cfg, s)

    @given(configs(k_max=5))
    def test_scan_grows_monotonically(self, cfg):
        prev = SubIC()
        states = list(scan(cfg, finish_rx=True))
        for s, _ in states[1:]:
            assert prev.rx <= s.rx and prev.tx <= s.tx
            assert len(s.rx) + len(s.tx) == len(prev.rx) + len(prev.tx) + 1
            prev = s
        assert states[-1][0] == SubIC.full(cfg.K)


class TestEquivalence:
    @given(configs(k_max=4, c_max=4))
    def test_against_literal_oracle(self, cfg):
        expect = oracle_feasible(cfg)
        assert is_feasible_bruteforce(cfg).feasible == expect
        assert is_feasible(cfg).feasible == expect

    @given(configs(k_min=5, k_max=6, c_max=6))
    def test_scan_against_bruteforce_larger(self, cfg):
        assert is_feasible(cfg).feasible == is_feasible_bruteforce(cfg).feasible

    @given(configs(k_max=5))
    def test_feasible_classification_follows_count(self, cfg):
        rep = is_feasible(cfg)
        if rep.feasible:
            excess = sum(cfg.N) + sum(cfg.M) - cfg.K * (cfg.K + 1)
            assert excess >= 0
            assert rep.classification is (Classification.TIGHT if excess == 0 else Classification.SUPER)

    @given(configs(k_max=4, c_max=4), st.data())
    def test_adding_antenna_preserves_feasibility(self, cfg, data):
        if not is_feasible(cfg).feasible:
            return
        side = data.draw(st.sampled_from("NM"))
        k = data.draw(st.integers(0, cfg.K - 1))
        N, M = list(cfg.N), list(cfg.M)
        (N if side == "N" else M)[k] += 1
        assert is_feasible(AntennaConfig(tuple(N), tuple(M))).feasible

    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8))
    def test_homogeneous_closed_form(self, N, M, K):
        cfg = AntennaConfig((N,) * K, (M,) * K)
        assert is_feasible(cfg).feasible == (N + M >= K + 1)


@st.composite
def disjoint_pairs(draw):
    K = draw(st.integers(1, 8))
    label = st.lists(st.sampled_from("ab-"), min_size=K, max_size=K)
    rx, tx = draw(label), draw(label)
    A = {i + 1 for i, c in enumerate(rx) if c == "a"}
    A2 = {i + 1 for i, c in enumerate(rx) if c == "b"}
    B = {i + 1 for i, c in enumerate(tx) if c == "a"}
    B2 = {i + 1 for i, c in enumerate(tx) if c == "b"}
    cfg = draw(configs(k_min=K, k_max=K, c_max=6))
    return cfg, A, A2, B, B2


@given(disjoint_pairs())
def test_disjoint_union_identities(case):
    cfg, A, A2, B, B2 = case

    def s(r, t):
        return SubIC(frozenset(r), frozenset(t))

    assert n_var(cfg, s(A | A2, B | B2)) == n_var(cfg, s(A, B)) + n_var(cfg, s(A2, B2))
    assert n_eq(cfg, s(A | A2, B | B2)) == (
        n_eq(cfg, s(A, B)) + n_eq(cfg, s(A2, B)) + n_eq(cfg, s(A, B2)) + n_eq(cfg, s(A2, B2))
    )


@given(configs(k_max=5, c_max=4))
def test_fixing_a_tight_sub_ic_keeps_the_rest_proper(cfg):
    # after aligning inside a tight sub-IC, every disjoint remainder still has
    # enough variables for its own equations plus those crossing into the sub-IC
    if not is_feasible(cfg).feasible:
        return
    s = smallest_tight_subic(cfg)
    if s is None:
        return
    rest_rx = [u for u in cfg.users if u not in s.rx]
    rest_tx = [u for u in cfg.users if u not in s.tx]
    for r in range(len(rest_rx) + 1):
        for R2 in itertools.combinations(rest_rx, r):
            for t in range(len(rest_tx) + 1):
                for T2 in itertools.combinations(rest_tx, t):
                    R2s, T2s = frozenset(R2), frozenset(T2)
                    lhs = n_var(cfg, SubIC(R2s, T2s))
                    rhs = n_eq(cfg, SubIC(s.rx, T2s)) + n_eq(cfg, SubIC(R2s, s.tx)) + n_eq(cfg, SubIC(R2s, T2s))
                    assert lhs >= rhs
