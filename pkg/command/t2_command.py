from decoherence.t2_model import fit_t2_model, load_model
from pipeline.t2_pipeline import build_fit_document, build_prediction_table, prepare_t2_data
from pipeline.table_writer import read_table
from .base_command import CommandRunner


class T2Command(CommandRunner):
    name = "t2"

    def _data(self):
        return prepare_t2_data(read_table(self.config.data), self.system, self.ops, self.config.ct_frequency)

    def compute(self, progress_callback=None):
        if self.config.mode == "fit":
            fit = fit_t2_model(self._data(), shared=self.config.shared)
            return build_fit_document(fit)

        model = load_model(self.config.model)
        if self.config.data:
            data = self._data()
            return build_prediction_table(model, data["x"].values, data["concentration_cm3"].values)
        return build_prediction_table(model, self.config.x, self.config.concentration)
