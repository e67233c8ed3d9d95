import logging
import os
import numpy as np
from tqdm import tqdm

log = logging.getLogger(__name__)


def progress(iterable=None, total=None, desc='', **kwargs):
    """
    Wrap a loop in a progress bar on stderr. Disabled when DIALRANK_NO_PROGRESS is set or logging is quieter
    than INFO, so batch runs and tests stay silent.
    :param iterable: The iterable to wrap, may be None if used as manual bar with update().
    :param total: Number of expected iterations.
    :param desc: Prefix shown before the bar.
    :return: The tqdm instance.
    """
    disable = bool(os.environ.get('DIALRANK_NO_PROGRESS')) or not logging.getLogger('dialrank').isEnabledFor(
        logging.INFO)
    return tqdm(iterable, total=total, desc=desc, disable=disable, leave=False, **kwargs)


def make_rng(seed, *stream) -> np.random.Generator:
    """
    A generator for an independent, reproducible stream. Different `stream` keys give independent streams from
    the same seed, e.g. one per dialogue.
    :param seed: The run seed.
    :param stream: Additional integers identifying the stream.
    :return: numpy Generator.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(s) for s in stream]))


FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
MASK64 = 0xffffffffffffffff


def fnv1a_64(data: str) -> int:
    """
    64 bit FNV-1a hash of the UTF-8 bytes of a string.
    :param data: The string.
    :return: Unsigned 64 bit hash as int.
    """
    h = FNV_OFFSET
    for b in data.encode('utf-8'):
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def as_float32_exact(a: np.ndarray) -> np.ndarray:
    """
    Round an array to values exactly representable in float32 but keep float64 as working type. Models are
    rounded like this once after init and after training so that checkpoints (float32) are lossless.
    :param a: The array.
    :return: The rounded float64 array.
    """
    return np.asarray(a, dtype=np.float64).astype(np.float32).astype(np.float64)
