from pipeline.spectrum_pipeline import build_spectrum_table
from spectra.field_sweep import field_sweep
from spectra.lineshape import linewidth_from_preset
from .base_command import CommandRunner


class SpectrumCommand(CommandRunner):
    name = "spectrum"

    def linewidth_model(self):
        config = self.config
        return linewidth_from_preset(
            config.linewidth,
            sigma_f0=config.width_f0,
            sigma_A=config.width_A,
            sigma_B=config.width_B,
            shape=config.shape,
        )

    def compute(self, progress_callback=None):
        spectrum = field_sweep(
            self.system,
            float(self.config.f_mw),
            self.config.field_range,
            self.config.grid,
            self.linewidth_model(),
            ops=self.ops,
            progress_callback=progress_callback,
        )
        return build_spectrum_table(spectrum)
