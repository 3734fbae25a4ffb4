import itertools

import numpy as np
import pytest

from spinCore.hamiltonian import solve
from spinCore.labels import find_branch
from spinTransitions.derivatives import StepSizeError, d2fdB2, richardson_derivative
from spinTransitions.tracking import BranchEvaluator, BranchTrackingError, match_levels, track_levels
from spinTransitions.transition import (
    ESR_TYPE,
    NMR_TYPE,
    TABLE_COLUMNS,
    dfdA,
    dfdB,
    resonant_transition,
    transition_table,
    transitions_at,
)

STRONG = 0.5


def _strong_esr(system, transitions):
    floor = STRONG * (system.gamma_e / 2) ** 2
    return [t for t in transitions if t.intensity > floor]


def test_only_delta_mF_one_pairs(si_bi, si_bi_ops):
    for trans in transitions_at(si_bi, si_bi_ops, 0.2):
        assert abs(trans.label_j.mF - trans.label_i.mF) == 1
        assert trans.level_i < trans.level_j
        assert trans.f >= 0


def test_zero_field_transitions_sit_at_hyperfine_splitting(si_bi, si_bi_ops):
    transitions = transitions_at(si_bi, si_bi_ops, 0.0)
    # Each F=4 level connects to its two mF +/- 1 neighbours in F=5
    assert len(transitions) == 18
    assert all(t.f == pytest.approx(5 * si_bi.A, abs=1e-6) for t in transitions)
    assert all((t.label_i.F, t.label_j.F) == (4, 5) for t in transitions)
    assert all(t.dfdA == pytest.approx(5.0, abs=1e-9) for t in transitions)


def test_zero_field_table_has_no_intra_manifold_rows(si_bi, si_bi_ops):
    table = transition_table(solve(si_bi, si_bi_ops, 0.0), si_bi, si_bi_ops)
    assert len(table) == 18
    assert table["f"].min() == pytest.approx(5 * si_bi.A, abs=1e-6)


def test_high_field_has_ten_strong_esr_lines(si_bi, si_bi_ops):
    strong = _strong_esr(si_bi, transitions_at(si_bi, si_bi_ops, 1.0))
    assert len(strong) == 10
    assert all(t.kind == ESR_TYPE for t in strong)
    assert all(t.label_i.branch_mS == -0.5 and t.label_j.branch_mS == 0.5 for t in strong)


def test_low_field_nmr_lines_are_weak(si_bi, si_bi_ops):
    transitions = transitions_at(si_bi, si_bi_ops, 1.0)
    nmr = [t for t in transitions if t.kind == NMR_TYPE]
    assert nmr
    assert all(t.intensity < STRONG * (si_bi.gamma_e / 2) ** 2 for t in nmr)


def test_clock_doublet_near_80mT(si_bi, si_bi_ops):
    transitions = transitions_at(si_bi, si_bi_ops, 0.0798)
    near = [t for t in transitions if abs(t.f - 7.0317) < 5e-3]
    assert len(near) == 2
    assert sorted(t.selection for t in near) == [-1, 1]
    assert abs(near[0].f - near[1].f) <= 3e-3
    assert all(t.kind == ESR_TYPE for t in near)
    assert all(abs(t.dfdB) < 0.05 for t in near)
    plus = next(t for t in near if t.selection == 1)
    assert plus.name == "|4,-2>->|5,-1>"
    assert plus.selection_text() == "+1"


def test_doublet_members_have_equal_intensity(si_bi, si_bi_ops):
    transitions = transitions_at(si_bi, si_bi_ops, 0.0799)
    near = [t for t in transitions if abs(t.f - 7.0317) < 5e-3]
    assert near[0].intensity == pytest.approx(near[1].intensity, rel=1e-2)


def _branch_energy(system, ops, B0, key):
    sol = solve(system, ops, B0)
    return sol.energies[find_branch(sol, *key)]


def test_hellmann_feynman_matches_finite_differences(si_bi, si_bi_ops):
    rng = np.random.default_rng(7)
    h = 1e-6
    for B0 in rng.uniform(0.01, 0.6, size=50):
        sol = solve(si_bi, si_bi_ops, B0)
        transitions = transitions_at(si_bi, si_bi_ops, B0)
        trans = transitions[rng.integers(len(transitions))]
        key_i, key_j = trans.key

        def frequency(field, system=si_bi):
            return (_branch_energy(system, si_bi_ops, field, key_j)
                    - _branch_energy(system, si_bi_ops, field, key_i))

        numeric_B = (frequency(B0 + h) - frequency(B0 - h)) / (2 * h)
        assert dfdB(trans, sol, si_bi, si_bi_ops) == pytest.approx(numeric_B, rel=1e-6, abs=1e-7)
        assert trans.dfdB == pytest.approx(numeric_B, rel=1e-6, abs=1e-7)

        plus, minus = si_bi.with_hyperfine(si_bi.A + h), si_bi.with_hyperfine(si_bi.A - h)
        numeric_A = (frequency(B0, plus) - frequency(B0, minus)) / (2 * h)
        assert dfdA(trans, sol, si_bi_ops) == pytest.approx(numeric_A, rel=1e-6, abs=1e-7)


def test_stretched_state_slope(si_bi, si_bi_ops):
    sol = solve(si_bi, si_bi_ops, 0.3)
    top = find_branch(sol, 5, 0)
    slopes = np.einsum("ij,i,ij->j", sol.vectors, si_bi.gamma_e * np.diag(si_bi_ops.Sz)
                       - si_bi.gamma_n * np.diag(si_bi_ops.Iz), sol.vectors)
    assert slopes[top] == pytest.approx(si_bi.gamma_e / 2 - 4.5 * si_bi.gamma_n, abs=1e-12)


def test_dfdA_approaches_nuclear_projection(si_bi, si_bi_ops):
    strong = _strong_esr(si_bi, transitions_at(si_bi, si_bi_ops, 100.0))
    assert len(strong) == 10
    for trans in strong:
        mI = trans.label_i.mF + 0.5
        assert trans.dfdA == pytest.approx(mI, abs=0.05)


def test_resonant_transition(si_bi, si_bi_ops):
    trans = resonant_transition(si_bi, si_bi_ops, 0.0798, 7.0317)
    assert trans.kind == ESR_TYPE
    assert trans.f == pytest.approx(7.0317, abs=3e-3)


def test_transition_table_columns(si_bi, si_bi_ops):
    table = transition_table(solve(si_bi, si_bi_ops, 0.0798), si_bi, si_bi_ops, curvature=True)
    assert list(table.columns) == TABLE_COLUMNS
    assert len(table) > 0
    near = table[(table["f"] - 7.0317).abs() < 5e-3]
    assert (near["d2fdB2"] > 100).all()


def test_richardson_derivative_of_quadratic():
    assert richardson_derivative(lambda x: 3 * x ** 2 + x, 2.0) == pytest.approx(13.0, abs=1e-9)
    assert richardson_derivative(np.sin, 0.3) == pytest.approx(np.cos(0.3), abs=1e-9)


def test_richardson_derivative_gives_up_on_noise():
    calls = itertools.count()

    def noisy(x):
        return float(next(calls)) ** 2

    with pytest.raises(StepSizeError):
        richardson_derivative(noisy, 1.0)


def test_second_derivative_of_clock_doublet(si_bi, si_bi_ops):
    plus = next(t for t in transitions_at(si_bi, si_bi_ops, 0.08) if t.selection == 1 and abs(t.f - 7.0317) < 5e-3)
    curvature = d2fdB2(plus, si_bi, si_bi_ops)
    assert curvature == pytest.approx(110, rel=0.05)


def test_track_levels_keeps_mF_along_branches(si_bi, si_bi_ops):
    sweep = track_levels(si_bi, si_bi_ops, np.linspace(0.0, 0.6, 241), keep_labels=True)
    assert sweep.n_branches == 20
    for labels in sweep.point_labels:
        assert [label.mF for label in labels] == [key[0] for key in sweep.keys]
        assert [label.rank for label in labels] == [key[1] for key in sweep.keys]
    steps = np.abs(np.diff(sweep.energies, axis=0))
    assert steps.max() < 16 * (0.6 / 240)
    assert len(sweep.branch_pairs()) > 0


def test_match_levels_rejects_ambiguous_overlaps():
    rows = np.array([
        [1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)],
        [1 / np.sqrt(2), -1 / np.sqrt(2), 0.0],
        [1 / np.sqrt(6), 1 / np.sqrt(6), -2 / np.sqrt(6)],
    ])
    with pytest.raises(BranchTrackingError):
        match_levels(np.eye(3), rows.T, 0.1)
    swapped = np.eye(3)[:, [1, 0, 2]]
    assert list(match_levels(np.eye(3), swapped, 0.1)) == [1, 0, 2]


def test_branch_evaluator_is_smooth_across_orientation(si_bi, si_bi_ops):
    forward = BranchEvaluator(si_bi, si_bi_ops, (-2.0, 0), (-1.0, 1))
    backward = BranchEvaluator(si_bi, si_bi_ops, (-2.0, 0), (-1.0, 1), sign=-1)
    assert forward.frequency(0.08) == pytest.approx(-backward.frequency(0.08))
    assert forward.frequency(0.08) == pytest.approx(7.0317, abs=1e-3)
    meta = forward.metadata(0.08)
    assert meta["kind"] == ESR_TYPE
    assert meta["selection"] == 1
    assert meta["label_i"].text() == "|4,-2>"
    with pytest.raises(BranchTrackingError):
        BranchEvaluator(si_bi, si_bi_ops, (5.0, 1), (4.0, 0)).frequency(0.08)


def test_sx_sum_rule(si_bi, si_bi_ops):
    # Tr(Sx^2) = d/4 for S = 1/2, in any orthonormal basis
    for B0 in np.linspace(0.0, 0.6, 81):
        sol = solve(si_bi, si_bi_ops, B0)
        elements = sol.vectors.T @ si_bi_ops.Sx @ sol.vectors
        assert np.sum(elements ** 2) == pytest.approx(si_bi.dim / 4, rel=1e-12)


def test_field_slope_is_bounded(si_bi, si_bi_ops):
    bound = si_bi.gamma_e + si_bi.I * si_bi.gamma_n
    for B0 in np.linspace(0.0, 0.6, 81):
        for trans in transitions_at(si_bi, si_bi_ops, B0):
            assert abs(trans.dfdB) <= bound + 1e-9
