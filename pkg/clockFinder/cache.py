import json
import os
from typing import Optional

from peewee import SQL, AutoField, CharField, Model, SqliteDatabase, TextField

from config.log_config import app_logger

# we don't init the database here
db = SqliteDatabase(None)

CACHE_FOLDER = os.path.join(os.path.expanduser("~"), ".cache", "clocktransition")
CACHE_DB_NAME = "ct_cache.v1.db"


class _ClockTransitionCache(Model):
    id = AutoField()
    system = CharField(max_length=64)
    search_params = TextField()
    result = TextField()

    class Meta:
        database = db
        constraints = [
            SQL(
                """
            UNIQUE (
                system,
                search_params
                )
            ON CONFLICT REPLACE
            """
            )
        ]


class ClockTransitionCache:
    """Clock transition search results keyed by the system and every search parameter."""

    @staticmethod
    def _sort_dict_recursively(obj):
        if isinstance(obj, dict):
            return {k: ClockTransitionCache._sort_dict_recursively(obj[k]) for k in sorted(obj.keys())}
        elif isinstance(obj, (list, tuple)):
            return [ClockTransitionCache._sort_dict_recursively(item) for item in obj]
        return obj

    def __init__(self, system: str, search_params: dict = None):
        assert len(system) < 64, "cache requires a system name shorter than 64 characters"
        self.system = system
        self.replace_params(search_params)

    def replace_params(self, params: dict = None):
        if params is None:
            params = {}
        self.params = params
        self.search_params = json.dumps(self._sort_dict_recursively(params))

    def get(self) -> Optional[dict]:
        record = _ClockTransitionCache.get_or_none(system=self.system, search_params=self.search_params)
        return json.loads(record.result) if record else None

    def set(self, result: dict):
        _ClockTransitionCache.create(system=self.system, search_params=self.search_params, result=json.dumps(result))


def init_db(db_path: Optional[str] = None):
    if db_path is None:
        os.makedirs(CACHE_FOLDER, exist_ok=True)
        db_path = os.path.join(CACHE_FOLDER, CACHE_DB_NAME)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)

    if not db.is_closed():
        db.close()
    db.init(
        db_path,
        pragmas={
            "journal_mode": "wal",  # Enable write-ahead logging
            "busy_timeout": 1000,   # Wait if database is busy
        },
    )
    db.create_tables([_ClockTransitionCache], safe=True)
    app_logger.debug(f"Clock transition cache at {db_path}")
    return db_path


def close_db():
    if db.database is not None and not db.is_closed():
        db.close()
