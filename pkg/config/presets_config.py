SYSTEM_NAME_MAP = {
    "Si:Bi": "Si-Bi",
    "Si:P": "Si-P",
    "Custom": "Custom"
}

# Widths are FWHM, frequency widths in GHz, field widths in T
LINEWIDTH_PRESETS = {
    # Enriched 28Si, measured around the 80 mT clock transition
    "28Si": {
        "sigma_f0": 270e-6,
        "sigma_A": 0.0,
        "sigma_B": 0.0,
        "shape": "gaussian"
    },
    # Natural silicon at the clock transition
    "natSi": {
        "sigma_f0": 500e-6,
        "sigma_A": 0.0,
        "sigma_B": 0.0,
        "shape": "gaussian"
    },
    # Same 28Si width expressed as a spread of the hyperfine constant
    "hyperfine": {
        "sigma_f0": 0.0,
        "sigma_A": 60e-6,
        "sigma_B": 0.0,
        "shape": "gaussian"
    }
}

DEFAULT_SYSTEM = "Si:Bi"
DEFAULT_LINEWIDTH = "28Si"
DEFAULT_DECOHERENCE_MODEL = "Si-Bi-28Si"

# Microwave frequency of the 80 mT clock transition, used for field-valued T2 data
DEFAULT_CT_FREQUENCY = 7.0317
