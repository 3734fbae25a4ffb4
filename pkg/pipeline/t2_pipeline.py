import numpy as np
import pandas as pd

from config.log_config import app_logger
from decoherence.t2_model import CHANNELS, DecoherenceModel, t2_frame
from spinTransitions.transition import resonant_transition

PREDICTION_COLUMNS = ["x", "concentration_cm3", "inv_T2_per_s", "T2_s", "rate_dFF", "rate_iFF", "rate_ID"]


def field_to_slope(system, ops, B0, f_mw):
    """x = |df/dB| / gamma_e of the ESR transition resonant with f_mw at B0."""
    trans = resonant_transition(system, ops, B0, f_mw)
    return min(abs(trans.dfdB) / system.gamma_e, 1.0)


def prepare_t2_data(frame: pd.DataFrame, system, ops, ct_frequency: float) -> pd.DataFrame:
    """Turn field-valued rows (B_T, optional f_mw_GHz) into normalized slopes x."""
    frame = frame.copy()
    if "x" not in frame.columns:
        if "B_T" not in frame.columns:
            raise ValueError("T2 data needs an x or a B_T column")
        f_mw = frame["f_mw_GHz"] if "f_mw_GHz" in frame.columns else pd.Series(ct_frequency, index=frame.index)
        frame["x"] = [field_to_slope(system, ops, float(B0), float(f)) for B0, f in zip(frame["B_T"], f_mw)]
        app_logger.info(f"Converted {len(frame)} field value(s) to normalized slopes")
    return t2_frame(frame)


def build_prediction_table(model: DecoherenceModel, x, concentration=None) -> pd.DataFrame:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = np.broadcast_to(model.concentration if concentration is None else np.asarray(concentration, dtype=float), x.shape)
    rates = model.channel_rates(x, C)
    total = sum(rates[channel] for channel in CHANNELS)
    return pd.DataFrame({
        "x": x,
        "concentration_cm3": C,
        "inv_T2_per_s": total,
        "T2_s": 1.0 / total,
        "rate_dFF": rates["dFF"],
        "rate_iFF": rates["iFF"],
        "rate_ID": rates["ID"],
    }, columns=PREDICTION_COLUMNS)


def build_fit_document(fit) -> dict:
    document = fit.to_dict()
    document["T2_at_x0_s"] = {
        f"{C:.6g}": float(1.0 / model.channel_rates(0.0)["dFF"]) if model.k_dFF > 0 else None
        for C, model in sorted(fit.models.items())
    }
    document["crossovers"] = fit.model.crossovers()
    return document
