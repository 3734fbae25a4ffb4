from clockFinder.cache import ClockTransitionCache, close_db, init_db
from clockFinder.clock_finder import find_all_cts
from config.log_config import app_logger
from pipeline.ct_pipeline import build_ct_table
from .base_command import CommandRunner


class FindCTCommand(CommandRunner):
    name = "find-ct"

    def _cache(self):
        if not self.config.cache:
            return None
        init_db(self.config.cache_db)
        return ClockTransitionCache(self.system.name, {
            "system": self.system.to_dict(),
            "field_range": list(self.config.field_range),
            "grid": self.config.grid,
            "quantity": self.config.quantity,
            "merge_doublets": self.config.merge_doublets,
        })

    def compute(self, progress_callback=None):
        cache = self._cache()
        try:
            cts, grazing = find_all_cts(
                self.system,
                self.config.field_range,
                quantity=self.config.quantity,
                n_grid=self.config.grid,
                merge_doublets=self.config.merge_doublets,
                ops=self.ops,
                progress_callback=progress_callback,
                cache=cache,
                return_grazing=True,
            )
        finally:
            if cache is not None:
                close_db()
        if not cts and not grazing:
            app_logger.info("No clock transitions in the requested range; writing an empty table")
        return build_ct_table(cts, grazing)
