import pandas as pd


def build_spectrum_table(spectrum) -> pd.DataFrame:
    """B_T and normalized amplitude, then one column per contributing transition."""
    columns = {"B_T": spectrum.fields, "amplitude": spectrum.amplitude}
    for name, values in spectrum.components.items():
        columns[name] = values
    return pd.DataFrame(columns)
