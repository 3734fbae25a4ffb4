from pipeline.levels_pipeline import build_levels_table
from .base_command import CommandRunner


class LevelsCommand(CommandRunner):
    name = "levels"

    def compute(self, progress_callback=None):
        return build_levels_table(self.system, self.ops, self.config.field_range, self.config.grid, progress_callback)
