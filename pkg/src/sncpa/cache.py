"""On-disk store of critical-value tables.

Tables are JSON files (see :meth:`CriticalValueTable.to_dict`).  Lookup
searches the user cache directory first and then the tables shipped with the
package.  The user directory comes from ``$SNCPA_CACHE_DIR`` and falls back to
``~/.cache/sncpa``.
"""

from __future__ import annotations

import logging
import os
import tempfile
from importlib import resources
from pathlib import Path

from .errors import CacheMiss, CacheVersionError
from .limit import (
    DEFAULT_PROBS,
    DEFAULT_SEED,
    CriticalValueTable,
    FunctionalFamily,
    quantile_table,
)

log = logging.getLogger(__name__)

ENV_VAR = "SNCPA_CACHE_DIR"
SIMULATE_STEPS = 20_000
SIMULATE_REPS = 10_000


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env).expanduser()
    return Path.home() / ".cache" / "sncpa"


def builtin_dir() -> Path:
    return Path(str(resources.files("sncpa") / "data" / "critvals"))


def table_filename(table: CriticalValueTable) -> str:
    return f"{table.ident}.json"


def load_table(path) -> CriticalValueTable:
    return CriticalValueTable.from_json(Path(path).read_text())


def write_table(table: CriticalValueTable, path) -> Path:
    """Write atomically so concurrent readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        fh.write(table.to_json())
    os.replace(tmp, path)
    return path


class CriticalValueCache:
    """Critical-value lookup with optional simulation on a miss.

    ``allow_simulate`` controls what happens when no stored table satisfies
    the request: simulate at ``simulate_steps``/``simulate_reps`` and store
    the result, or raise :class:`CacheMiss`.
    """

    def __init__(self, directory=None, *, allow_simulate: bool = False,
                 include_builtin: bool = True, simulate_steps: int = SIMULATE_STEPS,
                 simulate_reps: int = SIMULATE_REPS, seed: int = DEFAULT_SEED,
                 workers: int = 1):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.allow_simulate = allow_simulate
        self.include_builtin = include_builtin
        self.simulate_steps = simulate_steps
        self.simulate_reps = simulate_reps
        self.seed = seed
        self.workers = workers
        self._memory: dict[str, CriticalValueTable] = {}

    def _search_dirs(self) -> list[Path]:
        dirs = [self.directory]
        if self.include_builtin:
            dirs.append(builtin_dir())
        return dirs

    def tables(self) -> list[CriticalValueTable]:
        found = dict(self._memory)
        for d in self._search_dirs():
            if not d.is_dir():
                continue
            for path in sorted(d.glob("*.json")):
                if path.name in found:
                    continue
                try:
                    found[path.name] = load_table(path)
                except CacheVersionError as exc:
                    log.warning("skipping %s: %s", path, exc)
                except (ValueError, KeyError) as exc:
                    log.warning("skipping unreadable cache file %s: %s", path, exc)
        return list(found.values())

    def find(self, family: FunctionalFamily, min_steps: int = 0,
             min_reps: int = 0) -> CriticalValueTable | None:
        best = None
        for table in self.tables():
            if table.family != family or table.steps < min_steps or table.reps < min_reps:
                continue
            if best is None or (table.steps * table.reps, table.reps) > (best.steps * best.reps, best.reps):
                best = table
        return best

    def put(self, table: CriticalValueTable, persist: bool = True) -> None:
        name = table_filename(table)
        self._memory[name] = table
        if persist:
            try:
                write_table(table, self.directory / name)
            except OSError as exc:
                log.warning("could not persist %s: %s", name, exc)

    def get(self, family: FunctionalFamily, min_steps: int = 0,
            min_reps: int = 0) -> CriticalValueTable:
        table = self.find(family, min_steps, min_reps)
        if table is not None:
            return table
        if not self.allow_simulate:
            raise CacheMiss(
                f"no cached table for {family.label} with steps >= {min_steps}, "
                f"reps >= {min_reps}; run `sncpa critvals` or allow simulation")
        steps = max(self.simulate_steps, min_steps)
        reps = max(self.simulate_reps, min_reps)
        log.info("simulating %s at N=%d, M=%d", family.label, steps, reps)
        table = quantile_table(family, steps, reps, DEFAULT_PROBS, self.seed, self.workers)
        self.put(table)
        return table


def critical_value(family: FunctionalFamily, alpha: float, cache: CriticalValueCache,
                   min_steps: int = 0, min_reps: int = 0) -> float:
    """The ``1 - alpha`` quantile of the family's limiting distribution."""
    return cache.get(family, min_steps, min_reps).critical_value(alpha)
