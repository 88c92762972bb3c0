import logging
import os
import re
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from grouproulette import get_settings
from grouproulette.bounds import WINDOW_NARROW, BoundsTable, run_bounds
from grouproulette.errors import CacheIntegrityError, DomainError

# Set up logging
logger = logging.getLogger("grouproulette.bounds.cache")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

CACHE_VERSION = get_settings()["cache_version"]
COLUMNS = ["n", "lower_p_num", "lower_q_num", "scale"]
ENV_CACHE_DIR = "GROUPROULETTE_CACHE_DIR"


def resolve_cache_dir(cache_dir: Optional[Union[str, Path]] = None) -> Path:
    """Explicit directory, else $GROUPROULETTE_CACHE_DIR, else the settings default"""
    if cache_dir:
        return Path(cache_dir)
    if os.environ.get(ENV_CACHE_DIR):
        return Path(os.environ[ENV_CACHE_DIR])
    return Path(get_settings()["cache_dir"])


def _suffix(policy: str, margin: int) -> str:
    return f"{policy}_margin{margin}" if margin else policy


def cache_path(*, cache_dir: Union[str, Path], scale: int, N: int, policy: str = WINDOW_NARROW, margin: int = 0) -> Path:
    return Path(cache_dir) / f"bounds_v{CACHE_VERSION}_scale{scale}_N{N}_{_suffix(policy, margin)}.csv"


def table_frame(table: BoundsTable) -> pd.DataFrame:
    """Rows n = 2..N as strings, so big integers never pass through floats"""
    ns = range(2, table.N + 1)
    return pd.DataFrame({
        "n": [str(n) for n in ns],
        "lower_p_num": [str(table.lower_p[n]) for n in ns],
        "lower_q_num": [str(table.lower_q[n]) for n in ns],
        "scale": [str(table.scale)] * len(ns),
    }, columns=COLUMNS)


def write_cache(*, table: BoundsTable, path: Union[str, Path]) -> Path:
    """Writes the table; the file appears under its final name only once complete

    Raises:
        OSError: the directory or file cannot be written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    table_frame(table).to_csv(partial, index=False, lineterminator="\n")
    os.replace(partial, path)
    logger.info(f"Wrote bounds for n <= {table.N} to {path}")
    return path


def _parse_int(value: str, *, column: str, n: Optional[int]) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise CacheIntegrityError(f"Row n={n}: {column} is not an integer: {value!r}", n) from e


def read_cache(*, path: Union[str, Path], scale: int, policy: str = WINDOW_NARROW, margin: int = 0) -> BoundsTable:
    """Reads and validates a bounds cache

    Args:
        path (str or Path): cache file
        scale (int): expected scale
        policy (str): window policy the table was built with
        margin (int): window margin the table was built with

    Raises:
        OSError: the file cannot be read
        CacheIntegrityError: wrong header, non-integer field, wrong scale, a gap in n,
            or bounds that are inconsistent; the error names the offending row

    Returns:
        BoundsTable: rows n = 0..N
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != COLUMNS:
        logger.warning(f"Unexpected cache header in {path}: {list(frame.columns)}")
        raise CacheIntegrityError(f"Cache header must be {','.join(COLUMNS)}, got {','.join(frame.columns)}")

    lower_p = [scale, 0]
    lower_q = [0, scale]
    for position, record in enumerate(frame.itertuples(index=False)):
        expected_n = position + 2
        n = _parse_int(record.n, column="n", n=expected_n)
        if n != expected_n:
            raise CacheIntegrityError(f"Row n={expected_n}: found n={record.n}", expected_n)
        p = _parse_int(record.lower_p_num, column="lower_p_num", n=n)
        q = _parse_int(record.lower_q_num, column="lower_q_num", n=n)
        row_scale = _parse_int(record.scale, column="scale", n=n)
        if row_scale != scale:
            raise CacheIntegrityError(f"Row n={n}: scale {row_scale} differs from {scale}", n)
        if p < 0 or q < 0 or p + q > scale:
            logger.warning(f"Inconsistent cached bounds at n={n}: {p}, {q}")
            raise CacheIntegrityError(f"Row n={n}: bounds {p} + {q} exceed scale {scale}", n)
        lower_p.append(p)
        lower_q.append(q)
    return BoundsTable(scale, lower_p, lower_q, policy, margin)


def lookup_cache(*, cache_dir: Union[str, Path], scale: int, N: int, policy: str = WINDOW_NARROW,
                 margin: int = 0) -> Optional[BoundsTable]:
    """Smallest cached table with matching scale and window that covers n <= N, cut to N"""
    cache_dir = Path(cache_dir)
    if not cache_dir.is_dir():
        return None
    pattern = re.compile(rf"bounds_v{CACHE_VERSION}_scale{scale}_N(\d+)_{re.escape(_suffix(policy, margin))}\.csv")
    candidates = []
    for entry in cache_dir.iterdir():
        match = pattern.fullmatch(entry.name)
        if match and int(match.group(1)) >= N:
            candidates.append((int(match.group(1)), entry))
    if not candidates:
        return None
    cached_n, path = min(candidates)
    logger.info(f"Using cached bounds {path} (N={cached_n}) for N={N}")
    return read_cache(path=path, scale=scale, policy=policy, margin=margin).truncated(N)


def load_or_compute(*, N: int, scale: int, policy: str = WINDOW_NARROW, margin: int = 0, threads: int = 1,
                    cache_dir: Optional[Union[str, Path]] = None, force_recompute: bool = False,
                    allow_compute: bool = True, quiet: bool = False) -> BoundsTable:
    """Cached bounds table for n <= N, computing and caching it when absent

    Raises:
        FileNotFoundError: no cache covers N and computing is not allowed
        CacheIntegrityError: a matching cache file is corrupted
    """
    if N < 1:
        raise DomainError(f"N must be at least 1, got {N}")
    cache_dir = resolve_cache_dir(cache_dir)
    if not force_recompute:
        table = lookup_cache(cache_dir=cache_dir, scale=scale, N=N, policy=policy, margin=margin)
        if table is not None:
            return table
        if not allow_compute:
            logger.warning(f"No cached bounds for N={N}, scale={scale} in {cache_dir}")
            raise FileNotFoundError(f"No bounds cache covering N={N} at scale {scale} in {cache_dir}")

    table = run_bounds(N=N, scale=scale, policy=policy, margin=margin, threads=threads, quiet=quiet)
    write_cache(table=table, path=cache_path(cache_dir=cache_dir, scale=scale, N=N, policy=policy, margin=margin))
    return table
