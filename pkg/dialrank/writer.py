"""
Checkpoint files: magic b'CVRK', format version (u32), a length prefixed UTF-8 JSON block with kind, hyperparameters,
vocabulary and the list of arrays, then the named arrays as little-endian float32 in the listed order.
"""
from __future__ import annotations
import json
import logging
import struct
from typing import Dict, Tuple
import numpy as np
from dialrank.errors import BadMagicError, CheckpointError, TruncatedCheckpointError, VersionError

log = logging.getLogger(__name__)

MAGIC = b'CVRK'
VERSION = 1
_U32 = struct.Struct('<I')


class Writer:
    """
    Writes and reads checkpoint files.
    """

    @staticmethod
    def write_checkpoint(path, header: dict, arrays: Dict[str, np.ndarray], version: int = VERSION):
        """
        Write a checkpoint. The JSON block is written with sorted keys, so equal content gives equal bytes.
        :param path: Target file.
        :param header: JSON serializable block, must contain 'kind'.
        :param arrays: Named arrays, stored as float32.
        :param version: Format version, only differs from VERSION in tests.
        :return: None.
        """
        if 'kind' not in header:
            raise CheckpointError('checkpoint header needs a kind')
        names = list(arrays)
        block = dict(header)
        block['arrays'] = [{'name': n, 'shape': list(np.shape(arrays[n]))} for n in names]
        data = json.dumps(block, sort_keys=True, ensure_ascii=False).encode('utf-8')
        with open(path, 'wb') as f:
            f.write(MAGIC)
            f.write(_U32.pack(version))
            f.write(_U32.pack(len(data)))
            f.write(data)
            for n in names:
                f.write(np.ascontiguousarray(arrays[n], dtype='<f4').tobytes())
        log.debug('wrote %s checkpoint with %d arrays to %s', header['kind'], len(names), path)

    @staticmethod
    def read_checkpoint(path) -> Tuple[dict, Dict[str, np.ndarray]]:
        """
        Read a checkpoint.
        :param path: The file.
        :return: (header, arrays), arrays as float64 copies of the stored float32 values.
        """
        with open(path, 'rb') as f:
            buf = f.read()
        if len(buf) < len(MAGIC):
            raise TruncatedCheckpointError('{}: file too short for a checkpoint'.format(path))
        if buf[:4] != MAGIC:
            raise BadMagicError('{}: not a checkpoint (magic {!r})'.format(path, buf[:4]))
        if len(buf) < 12:
            raise TruncatedCheckpointError('{}: header truncated'.format(path))
        version = _U32.unpack_from(buf, 4)[0]
        if version != VERSION:
            raise VersionError('{}: checkpoint version {}, this reader supports {}'.format(path, version, VERSION))
        size = _U32.unpack_from(buf, 8)[0]
        offset = 12 + size
        if len(buf) < offset:
            raise TruncatedCheckpointError('{}: parameter block truncated'.format(path))
        try:
            header = json.loads(buf[12:offset].decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError('{}: corrupt parameter block ({})'.format(path, e))
        arrays = {}
        for spec in header.pop('arrays', []):
            shape = tuple(spec['shape'])
            count = int(np.prod(shape, dtype=np.int64))
            end = offset + 4 * count
            if len(buf) < end:
                raise TruncatedCheckpointError('{}: array {} truncated'.format(path, spec['name']))
            arrays[spec['name']] = np.frombuffer(buf, dtype='<f4', count=count, offset=offset).reshape(
                shape).astype(np.float64)
            offset = end
        if offset != len(buf):
            raise CheckpointError('{}: {} unexpected trailing bytes'.format(path, len(buf) - offset))
        return header, arrays
