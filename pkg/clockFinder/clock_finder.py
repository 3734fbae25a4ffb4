"""
Clock transition search.

A clock transition (CT) is a stationary point of a transition frequency with
respect to the static field (quantity "dfdB") or the hyperfine constant
(quantity "dfdA"). Every |dmF| = 1 branch pair of a tracked sweep is scanned
for sign changes of the analytic slope; each bracket is then refined with
Brent's method on the same analytic slope.
"""

from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq

from config.log_config import app_logger
from spinCore.hamiltonian import EigenSolveError, solve
from spinCore.labels import find_branch
from spinCore.operators import SpinOperators, build_operators
from spinCore.spin_system import SpinSystem
from spinTransitions.derivatives import StepSizeError, richardson_derivative
from spinTransitions.tracking import BranchEvaluator, BranchTrackingError, LevelSweep, track_levels
from spinTransitions.transition import ESR_TYPE

QUANTITIES = ("dfdB", "dfdA")
DEFAULT_GRID = 2048
MIN_GRID = 16
GRAZING_TOLERANCE = 1e-4
ROOT_XTOL = 1e-10
SLOPE_TOLERANCE = 1e-6
CERTIFICATE_HALF_WIDTH = 5e-10
DUPLICATE_TOLERANCE = 1e-6
# Members of one doublet lie well under a mT apart
DOUBLET_FIELD_WINDOW = 2e-3


class RefinementError(RuntimeError):
    pass


@dataclass
class Bracket:
    lo: float
    hi: float
    evaluator: object
    quantity: str = "dfdB"
    pair: tuple = ()
    grazing: bool = False


@dataclass
class ClockTransition:
    quantity: str
    kind: str
    selection: int
    B_star: float
    f_star: float
    curvature: float
    dfdB: float
    dfdA: float
    level_i: int
    level_j: int
    label_i: str
    label_j: str
    key: tuple
    slope_at_root: float
    bracket_lo: float
    bracket_hi: float
    certified: bool = True
    partner_B_star: Optional[float] = None
    partner_f: Optional[float] = None

    @property
    def partner_key(self):
        (mF_i, rank_i), (mF_j, rank_j) = self.key
        return (mF_j, rank_i), (mF_i, rank_j)

    def to_dict(self):
        data = asdict(self)
        data["key"] = [list(part) for part in self.key]
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["key"] = tuple((float(mF), int(rank)) for mF, rank in data["key"])
        return cls(**data)


@dataclass
class GrazingPoint:
    """Grid point where |slope| touches a local minimum below GRAZING_TOLERANCE without changing sign."""
    quantity: str
    kind: str
    selection: int
    B0: float
    f: float
    slope: float
    level_i: int
    level_j: int
    label_i: str
    label_j: str
    key: tuple

    def to_dict(self):
        data = asdict(self)
        data["key"] = [list(part) for part in self.key]
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["key"] = tuple((float(mF), int(rank)) for mF, rank in data["key"])
        return cls(**data)


def _field_grid(B_range, n_grid):
    if n_grid < MIN_GRID:
        raise ValueError(f"Field grid needs at least {MIN_GRID} points, got {n_grid}")
    lo, hi = float(B_range[0]), float(B_range[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise ValueError(f"Invalid field range: {B_range}")
    return np.linspace(lo, hi, n_grid)


def _orientation(frequency):
    nonzero = frequency[np.abs(frequency) > 0]
    return 1.0 if len(nonzero) == 0 or nonzero[0] > 0 else -1.0


def _grazing_indices(values):
    magnitude = np.abs(values)
    indices = []
    for k in range(1, len(values) - 1):
        if magnitude[k] >= GRAZING_TOLERANCE:
            continue
        if not (magnitude[k] <= magnitude[k - 1] and magnitude[k] <= magnitude[k + 1]):
            continue
        if magnitude[k] == magnitude[k - 1] and magnitude[k] == magnitude[k + 1]:
            continue
        if values[k - 1] * values[k + 1] > 0:
            indices.append(k)
    return indices


def scan_and_bracket(
    system: SpinSystem,
    pair,
    B_range,
    n_grid: int = DEFAULT_GRID,
    quantity: str = "dfdB",
    ops: Optional[SpinOperators] = None,
    sweep: Optional[LevelSweep] = None,
) -> List[Bracket]:
    """Sign-change brackets of the pair's slope over the grid; grazing minima come back flagged."""
    if quantity not in QUANTITIES:
        raise ValueError(f"Unknown quantity: {quantity}, expected one of {QUANTITIES}")
    ops = ops or build_operators(system)
    if sweep is None:
        sweep = track_levels(system, ops, _field_grid(B_range, n_grid))
    a, b = pair
    fields = sweep.fields
    sign = _orientation(sweep.pair_frequency(a, b))
    values = sign * sweep.pair_slope(a, b, quantity)
    evaluator = BranchEvaluator(system, ops, sweep.keys[a], sweep.keys[b], sign=sign)

    brackets = []
    for k in range(len(fields) - 1):
        if values[k] == 0:
            brackets.append(Bracket(fields[k], fields[k], evaluator, quantity, pair))
        elif values[k] * values[k + 1] < 0:
            brackets.append(Bracket(fields[k], fields[k + 1], evaluator, quantity, pair))
    if values[-1] == 0:
        brackets.append(Bracket(fields[-1], fields[-1], evaluator, quantity, pair))

    for k in _grazing_indices(values):
        app_logger.warning(
            f"Grazing {quantity} minimum without sign change for branches {pair} "
            f"near B0={fields[k]:.6g} T (|slope|={abs(values[k]):.2e})"
        )
        brackets.append(Bracket(fields[k], fields[k], evaluator, quantity, pair, grazing=True))
    return brackets


def refine_ct(bracket: Bracket, xtol: float = ROOT_XTOL, slope_tolerance: float = SLOPE_TOLERANCE) -> ClockTransition:
    evaluator = bracket.evaluator
    quantity = bracket.quantity

    def slope(B0):
        return evaluator.slope(B0, quantity)

    lo, hi = bracket.lo, bracket.hi
    if lo == hi:
        root = lo
    else:
        try:
            root, info = brentq(slope, lo, hi, xtol=xtol, full_output=True, disp=False)
        except ValueError as e:
            raise RefinementError(f"Bracket [{lo:.9g}, {hi:.9g}] lost its sign change: {e}") from e
        if not info.converged:
            raise RefinementError(f"Brent iteration did not converge in [{lo:.9g}, {hi:.9g}]: {info.flag}")

    slope_at_root = float(slope(root))
    if abs(slope_at_root) > slope_tolerance:
        raise RefinementError(f"|{quantity}| = {abs(slope_at_root):.3e} at B0={root:.9g} exceeds {slope_tolerance:g}")

    cert_lo = max(lo, root - CERTIFICATE_HALF_WIDTH) if lo < hi else root - CERTIFICATE_HALF_WIDTH
    cert_hi = min(hi, root + CERTIFICATE_HALF_WIDTH) if lo < hi else root + CERTIFICATE_HALF_WIDTH
    certified = bool(slope(cert_lo) * slope(cert_hi) <= 0)

    frequency = float(evaluator.frequency(root))
    orientation = 1.0 if frequency >= 0 else -1.0
    try:
        curvature = orientation * richardson_derivative(evaluator.dfdb, root)
    except StepSizeError as e:
        app_logger.warning(f"Curvature at B0={root:.9g}: {e}")
        curvature = np.nan

    meta = evaluator.metadata(root)
    return ClockTransition(
        quantity=quantity,
        kind=meta["kind"],
        selection=int(meta["selection"]),
        B_star=float(root),
        f_star=abs(frequency),
        curvature=float(curvature),
        dfdB=orientation * float(evaluator.dfdb(root)),
        dfdA=orientation * float(evaluator.dfda(root)),
        level_i=meta["level_i"],
        level_j=meta["level_j"],
        label_i=meta["label_i"].text(),
        label_j=meta["label_j"].text(),
        key=meta["key"],
        slope_at_root=slope_at_root,
        bracket_lo=float(cert_lo),
        bracket_hi=float(cert_hi),
        certified=certified,
    )


def describe_grazing(bracket: Bracket) -> GrazingPoint:
    evaluator = bracket.evaluator
    B0 = bracket.lo
    frequency = float(evaluator.frequency(B0))
    orientation = 1.0 if frequency >= 0 else -1.0
    meta = evaluator.metadata(B0)
    return GrazingPoint(
        quantity=bracket.quantity,
        kind=meta["kind"],
        selection=int(meta["selection"]),
        B0=float(B0),
        f=abs(frequency),
        slope=orientation * float(evaluator.slope(B0, bracket.quantity)),
        level_i=meta["level_i"],
        level_j=meta["level_j"],
        label_i=meta["label_i"].text(),
        label_j=meta["label_j"].text(),
        key=meta["key"],
    )


def _partner_frequency(system, ops, ct: ClockTransition):
    sol = solve(system, ops, ct.B_star)
    (mF_i, rank_i), (mF_j, rank_j) = ct.partner_key
    try:
        i = find_branch(sol, mF_i, rank_i)
        j = find_branch(sol, mF_j, rank_j)
    except ValueError:
        return None
    return float(abs(sol.energies[j] - sol.energies[i]))


def _deduplicate(cts):
    unique = []
    for ct in cts:
        if any(ct.key == other.key and abs(ct.B_star - other.B_star) < DUPLICATE_TOLERANCE for other in unique):
            continue
        unique.append(ct)
    return unique


def merge_doublet_pairs(cts: List[ClockTransition]) -> List[ClockTransition]:
    """Report each selection-rule doublet once, by its +1 member, with the partner's field attached."""
    dropped = set()
    for index, ct in enumerate(cts):
        if ct.kind != ESR_TYPE or ct.selection != 1 or ct.quantity != "dfdB":
            continue
        for other_index, other in enumerate(cts):
            if other_index == index or other_index in dropped:
                continue
            if other.key == ct.partner_key and abs(other.B_star - ct.B_star) < DOUBLET_FIELD_WINDOW:
                ct.partner_B_star = other.B_star
                dropped.add(other_index)
                break
    return [ct for index, ct in enumerate(cts) if index not in dropped]


def find_all_cts(
    system: SpinSystem,
    B_range,
    quantity: str = "dfdB",
    n_grid: int = DEFAULT_GRID,
    merge_doublets: bool = True,
    ops: Optional[SpinOperators] = None,
    progress_callback: Optional[Callable[[int, int], None]] = None,
    cache=None,
    return_grazing: bool = False,
):
    """All CTs of every |dmF| = 1 branch pair in B_range, sorted by field.

    With return_grazing=True the result is (cts, grazing_points); grazing
    points are never reported as CTs.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"Unknown quantity: {quantity}, expected one of {QUANTITIES}")
    if float(B_range[0]) == float(B_range[1]):
        app_logger.warning(f"Empty field range {B_range}; no clock transitions to search")
        return ([], []) if return_grazing else []
    fields = _field_grid(B_range, n_grid)

    if cache is not None:
        cached = cache.get()
        if cached is not None:
            cts = [ClockTransition.from_dict(item) for item in cached["cts"]]
            grazing = [GrazingPoint.from_dict(item) for item in cached["grazing"]]
            app_logger.info(f"Loaded {len(cts)} clock transition(s) from cache")
            return (cts, grazing) if return_grazing else cts

    ops = ops or build_operators(system)
    sweep = track_levels(system, ops, fields, progress_callback=progress_callback)

    cts, grazing = [], []
    for pair in sweep.branch_pairs():
        for bracket in scan_and_bracket(system, pair, B_range, n_grid, quantity, ops=ops, sweep=sweep):
            try:
                if bracket.grazing:
                    grazing.append(describe_grazing(bracket))
                    continue
                ct = refine_ct(bracket)
            except (RefinementError, BranchTrackingError, StepSizeError, EigenSolveError) as e:
                app_logger.warning(f"Skipping branch pair {pair}: {e}")
                continue
            if not ct.certified:
                app_logger.warning(
                    f"Dropping {quantity} root at B0={ct.B_star:.9g} T for branches {pair}: "
                    f"no sign change across [{ct.bracket_lo:.9g}, {ct.bracket_hi:.9g}]"
                )
                continue
            cts.append(ct)

    cts = _deduplicate(cts)
    for ct in cts:
        if ct.kind == ESR_TYPE and ct.selection in (1, -1):
            ct.partner_f = _partner_frequency(system, ops, ct)
    if merge_doublets and quantity == "dfdB":
        cts = merge_doublet_pairs(cts)
    cts.sort(key=lambda ct: (ct.B_star, ct.key))
    grazing.sort(key=lambda point: (point.B0, point.key))

    app_logger.info(
        f"Found {len(cts)} {quantity} clock transition(s) and {len(grazing)} grazing point(s) "
        f"in [{B_range[0]}, {B_range[1]}] T"
    )
    if cache is not None:
        cache.set({"cts": [ct.to_dict() for ct in cts], "grazing": [point.to_dict() for point in grazing]})
    return (cts, grazing) if return_grazing else cts
