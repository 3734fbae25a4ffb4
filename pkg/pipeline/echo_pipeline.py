import numpy as np
import pandas as pd


def echo_arrays(frame: pd.DataFrame):
    """Delays (2tau, s) and amplitudes from a delay_s or tau_s column plus amplitude."""
    if "amplitude" not in frame.columns:
        raise ValueError("Echo data needs an amplitude column")
    if "delay_s" in frame.columns:
        delays = frame["delay_s"].to_numpy(dtype=float)
    elif "tau_s" in frame.columns:
        # tau is the pulse spacing; the echo forms at 2tau
        delays = 2.0 * frame["tau_s"].to_numpy(dtype=float)
    else:
        raise ValueError("Echo data needs a delay_s or tau_s column")
    return delays, frame["amplitude"].to_numpy(dtype=float)


def build_decay_table(decay) -> pd.DataFrame:
    return pd.DataFrame({"delay_s": np.asarray(decay.delays), "amplitude": np.asarray(decay.amplitude)})
