import dataclasses

import numpy as np
import pytest
from scipy.optimize import brentq

from clockFinder import clock_finder
from clockFinder.cache import ClockTransitionCache, close_db, init_db
from clockFinder.clock_finder import (
    Bracket,
    ClockTransition,
    GrazingPoint,
    RefinementError,
    _deduplicate,
    _grazing_indices,
    describe_grazing,
    find_all_cts,
    refine_ct,
)
from pipeline.ct_pipeline import build_ct_table
from spectra.lineshape import effective_linewidth, linewidth_from_preset
from spinCore.labels import StateLabel
from spinCore.operators import build_operators
from spinCore.spin_system import load_system
from spinTransitions.transition import ESR_TYPE, NMR_TYPE, transitions_at


def _root(system, m, B0):
    x = B0 * (system.gamma_e + system.gamma_n)
    return np.sqrt(x ** 2 + 2 * system.A * x * m + 25 * system.A ** 2)


def _esr_slope(system, m_low, m_up, B0):
    """Closed-form df/dB of lower(m_low) -> upper(m_up) for S=1/2, I=9/2."""
    g, A = system.gamma_e + system.gamma_n, system.A
    x = B0 * g
    return (-system.gamma_n * (m_up - m_low)
            + 0.5 * g * (x + A * m_low) / _root(system, m_low, B0)
            + 0.5 * g * (x + A * m_up) / _root(system, m_up, B0))


def test_four_esr_clock_transitions_below_250mT(esr_cts):
    assert len(esr_cts) == 4
    assert all(ct.kind == ESR_TYPE for ct in esr_cts)
    assert all(ct.selection == 1 for ct in esr_cts)
    fields = [ct.B_star for ct in esr_cts]
    assert fields == sorted(fields)
    assert fields == pytest.approx([0.0266, 0.0800, 0.1330, 0.1880], abs=3e-3)
    assert all(5.2 <= ct.f_star <= 7.35 for ct in esr_cts)


def test_every_ct_is_certified(esr_cts):
    for ct in esr_cts:
        assert abs(ct.slope_at_root) <= 1e-6
        assert ct.certified
        assert ct.bracket_lo <= ct.B_star <= ct.bracket_hi
        assert ct.bracket_hi - ct.bracket_lo <= 1e-9 + 1e-15
        assert ct.curvature > 0


def test_80mT_clock_transition(si_bi, ct_80mT):
    assert ct_80mT.B_star == pytest.approx(0.0798, abs=5e-4)
    assert ct_80mT.f_star == pytest.approx(7.0317, abs=5e-4)
    assert ct_80mT.label_i == "|4,-2>"
    assert ct_80mT.label_j == "|5,-1>"

    (m_low, _), (m_up, _) = ct_80mT.key
    expected = brentq(lambda B0: _esr_slope(si_bi, m_low, m_up, B0), 0.07, 0.09, xtol=1e-14)
    assert ct_80mT.B_star == pytest.approx(expected, abs=1e-8)


def test_80mT_curvature_and_hyperfine_slope(si_bi, ct_80mT):
    (m_low, _), (m_up, _) = ct_80mT.key
    g, A, B0 = si_bi.gamma_e + si_bi.gamma_n, si_bi.A, ct_80mT.B_star
    r_low, r_up = _root(si_bi, m_low, B0), _root(si_bi, m_up, B0)
    curvature = 0.5 * g ** 2 * A ** 2 * ((25 - m_low ** 2) / r_low ** 3 + (25 - m_up ** 2) / r_up ** 3)
    assert ct_80mT.curvature == pytest.approx(curvature, rel=1e-4)
    assert ct_80mT.curvature == pytest.approx(110, rel=0.02)

    x = B0 * g
    dfdA = 0.5 * ((x * m_low + 25 * A) / r_low + (x * m_up + 25 * A) / r_up)
    assert ct_80mT.dfdA == pytest.approx(dfdA, rel=1e-6)
    assert ct_80mT.dfdA == pytest.approx(4.77, abs=0.02)


def test_hyperfine_spread_reproduces_measured_width(ct_80mT):
    width = effective_linewidth(ct_80mT, linewidth_from_preset("hyperfine"))
    assert width == pytest.approx(270e-6, rel=0.1)


def test_doublet_partner_is_attached(si_bi, si_bi_ops, esr_cts):
    for ct in esr_cts:
        assert ct.partner_B_star is not None
        assert abs(ct.partner_B_star - ct.B_star) < 2e-3
        assert ct.partner_f is not None
        assert abs(ct.partner_f - ct.f_star) < 5e-3

    ct = min(esr_cts, key=lambda c: abs(c.B_star - 0.0798))
    near = [t for t in transitions_at(si_bi, si_bi_ops, ct.B_star) if abs(t.f - ct.f_star) < 5e-3]
    assert len(near) == 2
    assert near[0].intensity == pytest.approx(near[1].intensity, rel=1e-2)


def test_unmerged_search_reports_both_members(si_bi, si_bi_ops):
    cts = find_all_cts(si_bi, (0.07, 0.09), n_grid=64, merge_doublets=False, ops=si_bi_ops)
    assert sorted(ct.selection for ct in cts) == [-1, 1]
    minus = next(ct for ct in cts if ct.selection == -1)
    plus = next(ct for ct in cts if ct.selection == 1)
    assert minus.key == plus.partner_key
    assert minus.B_star == pytest.approx(0.07983, abs=3e-4)
    assert minus.f_star == pytest.approx(7.0328, abs=5e-4)
    assert minus.partner_B_star is None

    merged = find_all_cts(si_bi, (0.07, 0.09), n_grid=64, ops=si_bi_ops)
    assert len(merged) == 1
    assert merged[0].selection == 1
    assert merged[0].partner_B_star == pytest.approx(minus.B_star)


def test_nmr_clock_transitions(si_bi, si_bi_ops):
    cts = find_all_cts(si_bi, (0.3, 0.6), n_grid=512, ops=si_bi_ops)
    nmr = [ct for ct in cts if ct.kind == NMR_TYPE]
    assert nmr
    assert all(ct.B_star >= 0.3 for ct in nmr)
    assert all(0.7 <= ct.f_star <= 1.3 for ct in nmr)


def test_hyperfine_clock_transitions(si_bi, si_bi_ops):
    cts = find_all_cts(si_bi, (0.3, 0.5), quantity="dfdA", n_grid=256, ops=si_bi_ops)
    assert cts
    for ct in cts:
        assert ct.quantity == "dfdA"
        assert abs(ct.dfdA) <= 1e-6


def test_empty_and_invalid_ranges(si_bi, si_bi_ops):
    assert find_all_cts(si_bi, (0.4, 0.4), ops=si_bi_ops) == []
    with pytest.raises(ValueError):
        find_all_cts(si_bi, (0.07, 0.09), n_grid=8, ops=si_bi_ops)
    with pytest.raises(ValueError):
        find_all_cts(si_bi, (0.09, 0.07), n_grid=64, ops=si_bi_ops)
    with pytest.raises(ValueError):
        find_all_cts(si_bi, (0.07, 0.09), quantity="d2fdB2", ops=si_bi_ops)


class ParabolaEvaluator:
    """f = f0 + c (B - B0)^2 with hand-made labels."""

    def __init__(self, B0=0.08, f0=7.0, c=55.0):
        self.B0, self.f0, self.c = B0, f0, c

    def frequency(self, B):
        return self.f0 + self.c * (B - self.B0) ** 2

    def dfdb(self, B):
        return 2 * self.c * (B - self.B0)

    def dfda(self, B):
        return 4.0

    def slope(self, B, quantity="dfdB"):
        return self.dfdb(B) if quantity == "dfdB" else self.dfda(B)

    def metadata(self, B):
        lower = StateLabel(F=4, mF=-2, purity=0.9, branch_mS=-0.5, rank=0)
        upper = StateLabel(F=5, mF=-1, purity=0.9, branch_mS=0.5, rank=1)
        return {"level_i": 3, "level_j": 12, "label_i": lower, "label_j": upper,
                "kind": ESR_TYPE, "selection": 1, "key": ((-2.0, 0), (-1.0, 1))}


def test_refine_ct_on_a_parabola():
    ct = refine_ct(Bracket(0.07, 0.09, ParabolaEvaluator()))
    assert ct.B_star == pytest.approx(0.08, abs=1e-9)
    assert ct.f_star == pytest.approx(7.0, abs=1e-12)
    assert ct.curvature == pytest.approx(110.0, rel=1e-6)
    assert ct.dfdA == 4.0
    assert ct.certified
    assert ct.label_i == "|4,-2>"


def test_refine_ct_without_sign_change():
    with pytest.raises(RefinementError):
        refine_ct(Bracket(0.081, 0.09, ParabolaEvaluator()))


def test_grazing_minima():
    assert _grazing_indices(np.array([3e-4, 5e-5, 2e-4])) == [1]
    assert _grazing_indices(np.array([3e-4, 5e-5, -2e-4])) == []
    assert _grazing_indices(np.array([1.0, 0.5, 1.0])) == []


def test_clock_transition_round_trip(ct_80mT):
    restored = ClockTransition.from_dict(ct_80mT.to_dict())
    assert restored == ct_80mT


def test_cache_round_trip(tmp_path, si_bi, si_bi_ops):
    init_db(str(tmp_path / "ct_cache.db"))
    try:
        params = {"field_range": [0.07, 0.09], "grid": 64}
        cache = ClockTransitionCache("Si:Bi", params)
        assert cache.get() is None

        first = find_all_cts(si_bi, (0.07, 0.09), n_grid=64, ops=si_bi_ops, cache=cache)
        assert cache.get()["cts"] == [ct.to_dict() for ct in first]
        second = find_all_cts(si_bi, (0.07, 0.09), n_grid=64, ops=si_bi_ops, cache=cache)
        assert second == first

        other = ClockTransitionCache("Si:Bi", {"grid": 64, "field_range": [0.07, 0.1]})
        assert other.get() is None
        reordered = ClockTransitionCache("Si:Bi", {"grid": 64, "field_range": [0.07, 0.09]})
        assert reordered.get() is not None
    finally:
        close_db()


def test_finer_grid_keeps_every_clock_transition(si_bi, si_bi_ops, esr_cts):
    coarse = find_all_cts(si_bi, (0.005, 0.25), n_grid=1024, ops=si_bi_ops)
    assert coarse
    for ct in coarse:
        assert any(fine.key == ct.key and abs(fine.B_star - ct.B_star) < 1e-6 for fine in esr_cts)


def test_phosphorus_has_no_esr_clock_transition():
    si_p = load_system("Si:P")
    cts = find_all_cts(si_p, (0.005, 0.6), n_grid=512, ops=build_operators(si_p))
    assert all(ct.kind == NMR_TYPE for ct in cts)


def test_nearby_roots_of_one_pair_are_merged(ct_80mT):
    shifted = dataclasses.replace(ct_80mT, B_star=ct_80mT.B_star + 5e-7)
    distinct = dataclasses.replace(ct_80mT, B_star=ct_80mT.B_star + 5e-6)
    assert _deduplicate([ct_80mT, shifted]) == [ct_80mT]
    assert len(_deduplicate([ct_80mT, distinct])) == 2


class CubicEvaluator(ParabolaEvaluator):
    """f = f0 + c (B - B0)^3: the slope touches zero at B0 without changing sign."""

    def frequency(self, B):
        return self.f0 + self.c * (B - self.B0) ** 3

    def dfdb(self, B):
        return 3 * self.c * (B - self.B0) ** 2


def test_describe_grazing_point():
    point = describe_grazing(Bracket(0.085, 0.085, CubicEvaluator(B0=0.085), grazing=True))
    assert point.B0 == 0.085
    assert point.f == pytest.approx(7.0)
    assert point.slope == 0.0
    assert point.label_i == "|4,-2>"
    assert GrazingPoint.from_dict(point.to_dict()) == point


def test_search_reports_grazing_points_and_drops_uncertified_roots(monkeypatch, si_bi, si_bi_ops):
    calls = []

    def scan(system, pair, B_range, n_grid, quantity, ops=None, sweep=None):
        calls.append(pair)
        if len(calls) > 1:
            return []
        return [
            Bracket(0.07, 0.09, ParabolaEvaluator()),
            Bracket(0.075, 0.075, CubicEvaluator(B0=0.075)),
            Bracket(0.085, 0.085, CubicEvaluator(B0=0.085), grazing=True),
        ]

    monkeypatch.setattr(clock_finder, "scan_and_bracket", scan)
    cts, grazing = find_all_cts(si_bi, (0.07, 0.09), n_grid=16, ops=si_bi_ops, return_grazing=True)
    assert len(cts) == 1
    assert cts[0].B_star == pytest.approx(0.08, abs=1e-9)
    assert cts[0].certified
    assert [point.B0 for point in grazing] == [0.085]

    table = build_ct_table(cts, grazing)
    assert list(table["grazing"]) == [False, True]
    assert table["B_star_T"].iloc[1] == 0.085
