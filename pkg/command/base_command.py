import pandas as pd

from config.log_config import app_logger
from pipeline.table_writer import write_document, write_table
from spinCore.operators import build_operators
from spinCore.spin_system import load_system
from .run_config import RunConfig


class CommandRunner:
    name = None

    def __init__(self, config: RunConfig):
        self.config = config
        self._system = None
        self._ops = None

    @property
    def system(self):
        if self._system is None:
            self._system = load_system(self.config.system)
        return self._system

    @property
    def ops(self):
        if self._ops is None:
            self._ops = build_operators(self.system)
        return self._ops

    def compute(self, progress_callback=None):
        """Abstract method: produce a table (DataFrame) or a nested result document."""
        raise NotImplementedError

    def write_result(self, result):
        path = self.config.output_path
        if isinstance(result, pd.DataFrame):
            return write_table(result, path, self.config.format)
        return write_document(result, path, self.config.format)

    def process(self, progress_callback=None):
        app_logger.info(f"Running {self.name}...")
        result = self.compute(progress_callback)
        if isinstance(result, pd.DataFrame) and result.empty:
            app_logger.warning(f"{self.name} produced an empty table")
        output_path = self.write_result(result)
        app_logger.info(f"{self.name} completed.")
        return output_path
