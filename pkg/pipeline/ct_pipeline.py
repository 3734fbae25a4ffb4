import pandas as pd

CT_COLUMNS = [
    "quantity", "kind", "B_star_T", "f_star_GHz", "curvature_GHz_per_T2", "level_i", "level_j", "selection",
    "label_i", "label_j", "dfdA", "partner_B_star_T", "partner_f_GHz", "grazing",
]


def _selection_text(selection):
    return {1: "+1", -1: "-1"}.get(selection, "other")


def build_ct_table(cts, grazing=()) -> pd.DataFrame:
    """One row per CT; grazing points follow as flagged rows without a curvature."""
    rows = [
        {
            "quantity": ct.quantity,
            "kind": ct.kind,
            "B_star_T": ct.B_star,
            "f_star_GHz": ct.f_star,
            "curvature_GHz_per_T2": ct.curvature,
            "level_i": ct.level_i,
            "level_j": ct.level_j,
            "selection": _selection_text(ct.selection),
            "label_i": ct.label_i,
            "label_j": ct.label_j,
            "dfdA": ct.dfdA,
            "partner_B_star_T": ct.partner_B_star,
            "partner_f_GHz": ct.partner_f,
            "grazing": False,
        }
        for ct in cts
    ]
    rows.extend(
        {
            "quantity": point.quantity,
            "kind": point.kind,
            "B_star_T": point.B0,
            "f_star_GHz": point.f,
            "curvature_GHz_per_T2": None,
            "level_i": point.level_i,
            "level_j": point.level_j,
            "selection": _selection_text(point.selection),
            "label_i": point.label_i,
            "label_j": point.label_j,
            "dfdA": None,
            "partner_B_star_T": None,
            "partner_f_GHz": None,
            "grazing": True,
        }
        for point in grazing
    )
    return pd.DataFrame(rows, columns=CT_COLUMNS)
